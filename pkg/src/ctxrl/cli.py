"""Command-line pipeline: generate context sets, train the policy matrix,
select checkpoints on validation, test, and build reports.

Exit codes: 0 success, 1 configuration error, 2 runtime fault, 3 integrity
error.  Finished stage outputs are reused on re-runs; conflicting outputs
are never overwritten without --force.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import (
    RunConfig,
    build_run_config,
    config_hash,
    context_space_for,
    expand_cells,
    materialize_manifest,
)
from .envs import EnvFault
from .evaluation import (
    CheckpointPolicy,
    evaluate,
    score_checkpoints,
    select_best_checkpoint,
)
from .lhs import lhs_sample
from .report import ReportError, build_report, export_trajectories
from .serialize import IntegrityError
from .spaces import ConfigError, ContextVector
from .trainer import ConfigHashMismatch, run_training

SPLITS = ("train", "validation", "test")


def _fmt(x) -> str:
    return repr(float(x))


class StageConflict(RuntimeError):
    """Existing output disagrees with what this invocation would write."""


def load_manifest(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"manifest file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"manifest is not valid JSON: {e}")
    return materialize_manifest(raw)


def _write_or_check(path: Path, content: str, force: bool) -> bool:
    """Write `content`; re-writing identical content is a no-op.

    Returns True when the file was (re)written.
    """
    if path.exists() and not force:
        if path.read_text() == content:
            return False
        raise StageConflict(
            f"{path} exists with different content; pass --force to overwrite"
        )
    path.write_text(content)
    return True


def _contexts_csv(manifest: dict, split: str, seed: int) -> str:
    space = context_space_for(manifest["env"], manifest["context_dims"])
    ctxs = lhs_sample(manifest["set_sizes"][split], space, seed)
    lines = [
        f"# config_hash={config_hash(manifest)}",
        f"# lhs_seed={seed}",
        ",".join(["context_id"] + space.names),
    ]
    for c in ctxs:
        lines.append(",".join([str(c.context_id)] + [_fmt(v) for v in c.values]))
    return "\n".join(lines) + "\n"


def read_contexts(exp_dir: Path, manifest: dict, split: str) -> list[ContextVector]:
    space = context_space_for(manifest["env"], manifest["context_dims"])
    path = exp_dir / "contexts" / f"{split}.csv"
    if not path.exists():
        raise ConfigError(f"{path} missing; run gen-contexts first")
    rows = [
        line for line in path.read_text().splitlines()
        if line and not line.startswith("#")
    ]
    out = []
    for line in rows[1:]:
        parts = line.split(",")
        out.append(
            ContextVector(
                np.array([float(v) for v in parts[1:]]), int(parts[0]), space
            )
        )
    return out


def context_seeds(manifest: dict) -> dict[str, int]:
    base = manifest["context_seed"]
    return {"train": base, "validation": base + 1, "test": base + 2}


# -- stages ---------------------------------------------------------------


def stage_gen_contexts(manifest: dict, exp_dir: Path, force: bool) -> None:
    (exp_dir / "contexts").mkdir(parents=True, exist_ok=True)
    mhash = config_hash(manifest)
    _write_or_check(
        exp_dir / "manifest.json",
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
        force,
    )
    seeds = context_seeds(manifest)
    for split in SPLITS:
        _write_or_check(
            exp_dir / "contexts" / f"{split}.csv",
            _contexts_csv(manifest, split, seeds[split]),
            force,
        )
    _write_or_check(
        exp_dir / "contexts" / "meta.json",
        json.dumps({"config_hash": mhash, "lhs_seeds": seeds}, sort_keys=True,
                   indent=2) + "\n",
        force,
    )
    print(f"[gen-contexts] wrote context sets under {exp_dir / 'contexts'}")


def _train_one(cfg_dict: dict, run_dir: str) -> str:
    cfg = RunConfig.from_dict(cfg_dict)
    stats = run_training(cfg, run_dir)
    marker = {
        "config_hash": cfg.hash(),
        "steps": stats.steps,
        "episodes": stats.episodes,
        "policy_updates": stats.policy_updates,
        "estimator_updates": stats.estimator_updates,
        "checkpoints": len(stats.checkpoints),
    }
    (Path(run_dir) / "train_complete.json").write_text(
        json.dumps(marker, sort_keys=True, indent=2) + "\n"
    )
    return run_dir


def _iter_runs(manifest: dict, exp_dir: Path, cell_filter, seed_filter):
    train_ctx = read_contexts(exp_dir, manifest, "train")
    train_vals = [c.values.tolist() for c in train_ctx]
    for name, spec in expand_cells(manifest):
        if cell_filter and name != cell_filter:
            continue
        for seed in manifest["seeds"]:
            if seed_filter is not None and seed != seed_filter:
                continue
            cfg = build_run_config(manifest, name, spec, seed, train_vals)
            yield cfg, exp_dir / "runs" / name / f"seed_{seed}"


def stage_train(manifest, exp_dir, force, jobs, cell=None, seed=None) -> None:
    pending = []
    for cfg, run_dir in _iter_runs(manifest, exp_dir, cell, seed):
        marker = run_dir / "train_complete.json"
        if marker.exists() and not force:
            done = json.loads(marker.read_text())
            if done.get("config_hash") == cfg.hash():
                print(f"[train] {cfg.cell}/seed_{cfg.seed}: already trained, skipping")
                continue
            raise StageConflict(
                f"{run_dir} holds a run with a different config; use --force"
            )
        run_dir.mkdir(parents=True, exist_ok=True)
        pending.append((cfg.to_dict(), str(run_dir)))
    if not pending:
        return
    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_train_one, c, d) for c, d in pending]
            for f in futures:
                print(f"[train] finished {f.result()}")
    else:
        for c, d in pending:
            _train_one(c, d)
            print(f"[train] finished {d}")


def stage_select(manifest, exp_dir, force, jobs, cell=None, seed=None) -> None:
    contexts = read_contexts(exp_dir, manifest, "validation")
    epc = manifest["episodes_per_context"]["validation"]
    for cfg, run_dir in _iter_runs(manifest, exp_dir, cell, seed):
        out = run_dir / "selection.json"
        if out.exists() and not force:
            prev = json.loads(out.read_text())
            if prev.get("config_hash") == cfg.hash():
                print(f"[select] {cfg.cell}/seed_{cfg.seed}: already selected, skipping")
                continue
            raise StageConflict(f"{out} belongs to a different config; use --force")
        ckpts = sorted((run_dir / "checkpoints").glob("step_*.ckpt"))
        if not ckpts:
            raise ConfigError(f"{run_dir}: no checkpoints; train first")
        scores = score_checkpoints(cfg, ckpts, contexts, epc, jobs=jobs)
        best = select_best_checkpoint(scores)
        out.write_text(
            json.dumps(
                {
                    "config_hash": cfg.hash(),
                    "episodes_per_context": epc,
                    "best_step": best.step,
                    "best_path": best.path,
                    "validation": [
                        {"step": s.step, "mean_return": s.mean_return}
                        for s in scores
                    ],
                },
                sort_keys=True,
                indent=2,
            )
            + "\n"
        )
        print(
            f"[select] {cfg.cell}/seed_{cfg.seed}: best step {best.step} "
            f"(validation mean {best.mean_return:.2f})"
        )


def stage_test(manifest, exp_dir, force, jobs, cell=None, seed=None,
               traces=False) -> None:
    contexts = read_contexts(exp_dir, manifest, "test")
    epc = manifest["episodes_per_context"]["test"]
    for cfg, run_dir in _iter_runs(manifest, exp_dir, cell, seed):
        out = run_dir / "test_results.csv"
        sel_path = run_dir / "selection.json"
        if not sel_path.exists():
            raise ConfigError(f"{sel_path} missing; run select first")
        sel = json.loads(sel_path.read_text())
        if sel.get("config_hash") != cfg.hash():
            raise ConfigHashMismatch(
                f"{sel_path} belongs to a different config"
            )
        if out.exists() and not force:
            first = out.read_text().splitlines()[0]
            if first == f"# config_hash={cfg.hash()}":
                print(f"[test] {cfg.cell}/seed_{cfg.seed}: already tested, skipping")
                continue
            raise StageConflict(f"{out} belongs to a different config; use --force")
        policy = CheckpointPolicy(cfg, sel["best_path"], record_estimates=traces)
        results = evaluate(
            policy, cfg.env, cfg.env_kwargs, contexts, epc,
            run_seed=cfg.seed, ckpt_step=policy.step,
            collect_traces=traces,
        )
        lines = [
            f"# config_hash={cfg.hash()}",
            "context_id,episode,return,steps,success,failed",
        ]
        for r in results:
            lines.append(
                f"{r.context_id},{r.episode},{_fmt(r.ret)},{r.steps},"
                f"{int(r.success)},{int(r.failed)}"
            )
        out.write_text("\n".join(lines) + "\n")
        if traces:
            export_trajectories(exp_dir, cfg.cell, cfg.seed, results)
        n_succ = sum(r.success for r in results)
        print(
            f"[test] {cfg.cell}/seed_{cfg.seed}: mean return "
            f"{np.mean([r.ret for r in results]):.2f}, "
            f"{n_succ}/{len(results)} successes"
        )


def stage_report(manifest, exp_dir) -> None:
    out = build_report(exp_dir)
    print(f"[report] wrote {out}")


# -- entry point --------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ctxrl",
        description="Context-aware RL experiment pipeline.",
    )
    parser.add_argument(
        "--runs-root",
        default=os.environ.get("CTXRL_RUNS_ROOT", "runs"),
        help="root directory for experiment outputs "
        "(env: CTXRL_RUNS_ROOT, default: ./runs)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen-contexts", "train", "select", "test", "report", "all"):
        p = sub.add_parser(name)
        p.add_argument("manifest", help="experiment manifest JSON file")
        p.add_argument("--force", action="store_true",
                       help="overwrite conflicting prior outputs")
        if name in ("train", "select", "test", "all"):
            p.add_argument("--jobs", type=int, default=1,
                           help="parallel workers for runs / evaluations")
            p.add_argument("--cell", default=None,
                           help="restrict to one policy cell")
            p.add_argument("--seed", type=int, default=None,
                           help="restrict to one seed")
        if name in ("test", "all"):
            p.add_argument("--traces", action="store_true",
                           help="export per-episode trajectory CSVs")
    args = parser.parse_args(argv)

    try:
        manifest = load_manifest(args.manifest)
        exp_dir = Path(args.runs_root) / manifest["name"]
        force = getattr(args, "force", False)
        jobs = getattr(args, "jobs", 1)
        cell = getattr(args, "cell", None)
        seed = getattr(args, "seed", None)
        traces = getattr(args, "traces", False)
        if args.command in ("gen-contexts", "all"):
            stage_gen_contexts(manifest, exp_dir, force)
        if args.command in ("train", "all"):
            stage_train(manifest, exp_dir, force, jobs, cell, seed)
        if args.command in ("select", "all"):
            stage_select(manifest, exp_dir, force, jobs, cell, seed)
        if args.command in ("test", "all"):
            stage_test(manifest, exp_dir, force, jobs, cell, seed, traces)
        if args.command in ("report", "all"):
            stage_report(manifest, exp_dir)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (IntegrityError, ConfigHashMismatch, StageConflict, ReportError) as e:
        print(f"integrity error: {e}", file=sys.stderr)
        return 3
    except (EnvFault, FloatingPointError, ArithmeticError, OSError) as e:
        print(f"runtime fault: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
