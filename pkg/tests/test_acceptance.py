"""Acceptance suite: one test per criterion, each printing a PASS/WARN line.

Criteria 5-7 are training-based ordering checks at reduced budgets and are
marked `slow` (hours of compute); run `pytest -m "not slow"` to exclude
them.  Their artifacts land under the repository's runs/ directory and are
reused across invocations when the manifests are unchanged.
"""

import json
import shutil
import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).parents[1]
RUNS_ROOT = REPO / "runs"

_lines: list[str] = []


def record(line: str) -> None:
    _lines.append(line)
    print(line)


def pytest_terminal_summary_lines():
    return _lines


# -- criterion 1: gradient oracle ------------------------------------------------


def test_criterion_1_gradient_oracle():
    from ctxrl import nets

    from fd_oracle import (
        finite_diff_grads,
        gradcheck,
        lstm_backprop,
        lstm_loss,
        mlp_backprop,
        mlp_loss,
    )

    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    total_components = 0
    strict_ok = 0
    for i in range(50):
        in_dim = int(rng.integers(2, 9))
        w1, w2 = int(rng.integers(2, 17)), int(rng.integers(2, 17))
        out = int(rng.integers(1, 5))
        net = nets.init_mlp(rng, in_dim, [w1, w2], out,
                            activation="relu" if i % 2 else "tanh")
        x = rng.standard_normal((2, in_dim))
        proj = rng.standard_normal((out, 1))
        bp = mlp_backprop(net, x, proj)
        fd = finite_diff_grads(net, lambda n: mlp_loss(n, x, proj))
        ok, tot, worst, all_pass = gradcheck(bp, fd)
        assert all_pass, f"mlp {i}: component outside tolerance (worst rel {worst})"
        strict_ok += ok
        total_components += tot
    for i in range(50):
        in_dim = int(rng.integers(2, 9))
        hidden = int(rng.integers(2, 17))
        out = int(rng.integers(1, 4))
        steps = int(rng.integers(2, 6))
        net = nets.init_lstm(rng, in_dim, hidden, out)
        xs = [rng.standard_normal((2, in_dim)) for _ in range(steps)]
        proj = rng.standard_normal((out, 1))
        bp = lstm_backprop(net, xs, proj)
        fd = finite_diff_grads(net, lambda n: lstm_loss(n, xs, proj))
        ok, tot, worst, all_pass = gradcheck(bp, fd)
        assert all_pass, f"lstm {i}: component outside tolerance (worst rel {worst})"
        strict_ok += ok
        total_components += tot
    elapsed = time.perf_counter() - t0
    assert strict_ok / total_components >= 0.99
    assert elapsed < 60.0, f"gradient oracle took {elapsed:.1f}s"
    record(
        f"CRITERION 1 PASS: 50 MLP + 50 LSTM gradchecked, "
        f"{strict_ok}/{total_components} components within 1e-4 relative error "
        f"({elapsed:.1f}s)"
    )


# -- criterion 2: loss routing ----------------------------------------------------


def test_criterion_2_loss_routing():
    from ctxrl import nets
    from ctxrl.context import Arch, ContextModel, Strategy
    from ctxrl.sac import SACConfig, SACLearner
    from ctxrl.tensor import Tape

    t0 = time.perf_counter()
    OBS, ACT, CTX, B, N = 3, 1, 2, 8, 5

    def fixed_batch():
        r = np.random.default_rng(77)
        return dict(
            s=r.standard_normal((B, OBS)), a=r.uniform(-1, 1, (B, ACT)),
            r=r.standard_normal(B), s2=r.standard_normal((B, OBS)),
            done=np.zeros(B), ctx=r.uniform(-1, 1, (B, CTX)),
            sets=r.standard_normal((B, N, 2 * OBS + ACT)),
        )

    grad_mass = {}
    for strategy in (Strategy.GT, Strategy.FP, Strategy.PL):
        rng = np.random.default_rng(5)
        model = ContextModel(strategy, Arch.LSTM, OBS, ACT, CTX, None, rng)
        lrn = SACLearner(OBS, ACT, 2.0, model.latent_dim,
                         SACConfig(hidden=(8, 8), batch_size=B), rng)
        b = fixed_batch()
        tape = Tape()
        evars = nets.leaves(tape, model.estimator)
        c_hat = model.estimate_batch(tape, evars, b["sets"])
        live = c_hat if strategy == Strategy.PL else None
        losses = lrn.update(b["s"], b["a"], b["r"], b["s2"], b["done"],
                            rng=np.random.default_rng(3), ctx=c_hat.value,
                            live_ctx=live, tape=tape)
        grad_mass[strategy] = sum(
            float(np.abs(tape.grad(losses.actor_grads, v)).sum())
            for v in evars.values()
        )
        if strategy == Strategy.FP:
            actor_before = {k: v.copy() for k, v in lrn.actor.params.items()}
            critics_before = [
                {k: v.copy() for k, v in c.params.items()}
                for c in (lrn.critic1, lrn.critic2)
            ]
            est_before = {k: v.copy() for k, v in model.estimator.params.items()}
            pred_before = {k: v.copy() for k, v in model.predictor.params.items()}
            model.supervision_update(tape, evars, c_hat, b["s"], b["a"],
                                     b["s2"], b["ctx"])
            assert any(
                not np.array_equal(model.estimator.params[k], est_before[k])
                for k in est_before
            ), "FP did not move the estimator"
            assert any(
                not np.array_equal(model.predictor.params[k], pred_before[k])
                for k in pred_before
            ), "FP did not move the predictor"
            assert all(
                np.array_equal(lrn.actor.params[k], actor_before[k])
                for k in actor_before
            ), "FP supervision moved the actor"
            for critic, before in zip((lrn.critic1, lrn.critic2), critics_before):
                assert all(
                    np.array_equal(critic.params[k], before[k]) for k in before
                ), "FP supervision moved a critic"

    assert grad_mass[Strategy.GT] == 0.0, "GT: actor loss leaked into estimator"
    assert grad_mass[Strategy.FP] == 0.0, "FP: actor loss leaked into estimator"
    assert grad_mass[Strategy.PL] > 0.0, "PL: actor loss never reached estimator"
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    record(
        f"CRITERION 2 PASS: actor-loss gradient mass on estimator "
        f"GT=0, FP=0, PL={grad_mass[Strategy.PL]:.3g}; FP moves only "
        f"estimator+predictor ({elapsed:.1f}s)"
    )


# -- criterion 3: LHS property fuzz ----------------------------------------------


def test_criterion_3_lhs_property_fuzz():
    from ctxrl.lhs import lhs_sample
    from ctxrl.spaces import ContextSpace

    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    for trial in range(200):
        n = int(rng.integers(2, 65))
        d = int(rng.integers(1, 6))
        dims = []
        for k in range(d):
            lo = float(rng.uniform(-10, 10))
            dims.append((f"d{k}", lo, lo + float(rng.uniform(0.1, 20))))
        space = ContextSpace(tuple(dims))
        pts = lhs_sample(n, space, seed=int(rng.integers(0, 1_000_000)))
        values = np.array([p.values for p in pts])
        for k, (_, lo, hi) in enumerate(dims):
            strata = np.floor((values[:, k] - lo) / (hi - lo) * n).astype(int)
            strata = np.clip(strata, 0, n - 1)
            counts = np.bincount(strata, minlength=n)
            assert np.all(counts == 1), (
                f"trial {trial}: dim {k} strata occupancy {counts}"
            )
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    record(
        f"CRITERION 3 PASS: 200 random (n, dims) LHS draws, every marginal "
        f"occupies each stratum exactly once ({elapsed:.1f}s)"
    )


# -- criterion 4: Welch oracle ----------------------------------------------------


def test_criterion_4_welch_oracle():
    import math

    from scipy import integrate

    from ctxrl.stats import welch_t_test

    def t_pdf(x, df):
        c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(
            df * math.pi
        )
        return c * (1 + x * x / df) ** (-(df + 1) / 2)

    t0 = time.perf_counter()
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(20):
        na, nb = int(rng.integers(3, 15)), int(rng.integers(3, 15))
        a = rng.normal(rng.uniform(-1, 1), rng.uniform(0.3, 2.0), na)
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.3, 2.0), nb)
        res = welch_t_test(a, b)
        tail, _ = integrate.quad(
            t_pdf, abs(res.t), np.inf, args=(res.df,), epsabs=1e-12
        )
        worst = max(worst, abs(res.p - 2.0 * tail))
        assert abs(res.p - 2.0 * tail) <= 1e-6
    same = welch_t_test([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])
    assert same.t == 0.0 and same.p == 1.0
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    record(
        f"CRITERION 4 PASS: 20 Welch p-values within {worst:.2e} of numeric "
        f"t-CDF integration; identical samples give t=0, p=1 ({elapsed:.1f}s)"
    )


# -- training-based criteria -------------------------------------------------------


def run_cli(args: list[str]) -> int:
    from ctxrl.cli import main

    return main(args)


def seed_means(exp_dir: Path, cell: str, seeds) -> dict[int, dict]:
    out = {}
    for seed in seeds:
        path = exp_dir / "runs" / cell / f"seed_{seed}" / "test_results.csv"
        assert path.exists(), f"missing {path}"
        rows = path.read_text().splitlines()[2:]
        rets = [float(r.split(",")[2]) for r in rows]
        succ = [int(r.split(",")[4]) for r in rows]
        out[seed] = {
            "mean_return": float(np.mean(rets)),
            "success_rate": float(np.mean(succ)),
            "episodes": len(rets),
        }
    return out


@pytest.mark.slow
def test_criterion_5_pendulum_gravity_ordering():
    rc = run_cli(
        ["--runs-root", str(RUNS_ROOT), "all",
         str(REPO / "manifests" / "pendulum_gravity.json"), "--jobs", "2"]
    )
    assert rc == 0
    exp = RUNS_ROOT / "pendulum_gravity"
    seeds = [0, 1, 2]
    oracle = seed_means(exp, "oracle", seeds)
    agnostic = seed_means(exp, "agnostic", seeds)
    wins = sum(
        oracle[s]["mean_return"] > agnostic[s]["mean_return"] for s in seeds
    )
    detail = ", ".join(
        f"seed {s}: oracle {oracle[s]['mean_return']:.0f} vs "
        f"agnostic {agnostic[s]['mean_return']:.0f}"
        for s in seeds
    )
    assert wins >= 2, f"oracle beat agnostic in only {wins}/3 seeds ({detail})"
    record(
        f"CRITERION 5 PASS: oracle > agnostic in {wins}/3 seeds on 1-D gravity "
        f"({detail})"
    )


@pytest.mark.slow
def test_criterion_6_context_benefit_length():
    rc = run_cli(
        ["--runs-root", str(RUNS_ROOT), "all",
         str(REPO / "manifests" / "pendulum_length.json"), "--jobs", "2"]
    )
    assert rc == 0
    exp = RUNS_ROOT / "pendulum_length"
    seeds = [0, 1, 2]
    agnostic = seed_means(exp, "agnostic", seeds)
    details = []
    for cell in ("pl_lstm", "gt_lstm"):
        aware = seed_means(exp, cell, seeds)
        wins = sum(
            aware[s]["mean_return"] > agnostic[s]["mean_return"] for s in seeds
        )
        details.append(f"{cell}: {wins}/3 seeds above agnostic")
        assert wins >= 2, (
            f"{cell} beat agnostic in only {wins}/3 seeds: "
            + ", ".join(
                f"seed {s}: {aware[s]['mean_return']:.0f} vs "
                f"{agnostic[s]['mean_return']:.0f}"
                for s in seeds
            )
        )
    record(
        "CRITERION 6 PASS: context-aware estimators beat agnostic on 1-D "
        "length (" + "; ".join(details) + ")"
    )


@pytest.mark.slow
def test_criterion_7_pushing_smoke_ordering():
    rc = run_cli(
        ["--runs-root", str(RUNS_ROOT), "all",
         str(REPO / "manifests" / "pushing_smoke.json"), "--jobs", "2"]
    )
    assert rc == 0
    exp = RUNS_ROOT / "pushing_smoke"
    seeds = [0, 1]
    oracle = seed_means(exp, "oracle", seeds)
    agnostic = seed_means(exp, "agnostic", seeds)
    for cell, stats in (("oracle", oracle), ("agnostic", agnostic)):
        for s in seeds:
            assert 0.0 <= stats[s]["success_rate"] <= 1.0
    oracle_successes = sum(
        oracle[s]["success_rate"] * oracle[s]["episodes"] for s in seeds
    )
    assert oracle_successes >= 1, "oracle achieved no successes at all"
    o_rate = np.mean([oracle[s]["success_rate"] for s in seeds])
    a_rate = np.mean([agnostic[s]["success_rate"] for s in seeds])
    detail = (
        f"oracle success {o_rate:.2f} "
        f"({[round(oracle[s]['success_rate'], 2) for s in seeds]}) vs agnostic "
        f"{a_rate:.2f} ({[round(agnostic[s]['success_rate'], 2) for s in seeds]})"
    )
    if o_rate >= a_rate:
        record(f"CRITERION 7 PASS: {detail}; success rates in [0, 1]")
    else:
        warnings.warn(
            f"criterion 7 ordering not met at this reduced budget: {detail}"
        )
        record(
            f"CRITERION 7 WARN: ordering not met at reduced budget ({detail}); "
            f"bounds and oracle-success checks passed"
        )


# -- criterion 8: environment invariants -------------------------------------------


def test_criterion_8_environment_invariants():
    from ctxrl.envs import PendulumEnv, PushingEnv, pendulum_space, pushing_space
    from ctxrl.envs.pushing import PUSHER_RADIUS, resolve_contact
    from ctxrl.spaces import ContextVector

    t0 = time.perf_counter()
    # pendulum upright equilibrium
    env = PendulumEnv()
    ctx = ContextVector(np.array([10.0]), 0, pendulum_space(["gravity"]))
    env.reset(ctx, np.random.default_rng(0))
    env.theta = 0.0
    env.theta_dot = 0.0
    assert env.step(np.array([0.0])).reward == 0.0
    # pendulum truncation at exactly 200
    env.reset(ctx, np.random.default_rng(1))
    for i in range(1, 201):
        res = env.step(np.array([1.0]))
        assert res.truncated == (i == 200)

    # pushing: d = 0 reward, success threshold, truncation at 250
    penv = PushingEnv()
    pctx = ContextVector(np.array([0.5, 0.3, 0.5]), 0, pushing_space())
    penv.reset(pctx, np.random.default_rng(0))
    penv._pose[:2] = penv.goal
    assert penv._reward(failed=False) == 0.0
    penv._pose[:2] = penv.goal + np.array([0.0299, 0.0])
    assert penv.step(np.array([0.0, 0.0])).terminated
    penv.reset(pctx, np.random.default_rng(3))
    for i in range(1, 251):
        sign = 1.0 if i % 2 else -1.0
        res = penv.step(np.array([0.004 * sign, 0.004 * sign]))
        assert res.truncated == (i == 250)

    # centerline push through the center of mass: zero rotation
    ctx_d = dict(mass=0.4, friction_tool=0.2, friction_table=0.4, com_offset=0.0)
    pose = np.array([0.1, 0.1, 0.0])
    pusher = np.array([0.1, 0.1 + 0.0525 + PUSHER_RADIUS - 0.0005])
    new_pose, _, moved = resolve_contact(pose, pusher, 0.0, ctx_d, 5.0)
    assert moved and new_pose[2] == 0.0
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    record(
        f"CRITERION 8 PASS: equilibrium reward, success threshold, 200/250 "
        f"truncation, centerline zero-rotation all hold ({elapsed:.1f}s)"
    )


# -- criterion 9: determinism -----------------------------------------------------


def test_criterion_9_smoke_determinism(tmp_path):
    t0 = time.perf_counter()
    manifest = REPO / "manifests" / "smoke.json"
    roots = [tmp_path / "a", tmp_path / "b"]
    reports = []
    for root in roots:
        rc = run_cli(["--runs-root", str(root), "all", str(manifest)])
        assert rc == 0
        reports.append((root / "smoke" / "report.csv").read_bytes())
    assert reports[0] == reports[1], "reports differ between identical runs"
    l0 = (roots[0] / "smoke" / "runs" / "pl_lstm" / "seed_0" / "losses.csv")
    l1 = (roots[1] / "smoke" / "runs" / "pl_lstm" / "seed_0" / "losses.csv")
    assert l0.read_bytes() == l1.read_bytes()
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0, f"smoke determinism took {elapsed:.0f}s"
    record(
        f"CRITERION 9 PASS: two `all` runs of the smoke manifest are "
        f"byte-identical ({elapsed:.0f}s)"
    )
