"""Joint training of the control policy and the context estimator.

Per environment step: sample a context set for the episode's context, infer
the context estimate, act, store the transition, then do exactly one policy
update and one estimator update (after warm-up).  Episodes cycle through the
training contexts round-robin.  Checkpoints are written evenly over a
configured trailing window of training steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nets
from .config import RunConfig
from .context import ContextModel, Mode, Strategy, compose_policy_input
from .envs import make_env
from .replay import ReplayBuffer, Transition
from .sac import SACConfig, SACLearner
from .serialize import IntegrityError, load_params, save_params
from .spaces import ContextVector
from .tensor import Tape


class ConfigHashMismatch(IOError):
    """Checkpoint was produced under a different configuration."""


def checkpoint_steps(total: int, count: int, window_start: float) -> list[int]:
    """`count` step indices spread evenly over the final training window."""
    start = int(round(total * window_start))
    span = total - start
    steps = sorted({start + int(round(j * span / count)) for j in range(1, count + 1)})
    return [s for s in steps if s > 0]


def _rng_state(gen: np.random.Generator) -> dict:
    return gen.bit_generator.state


@dataclass
class TrainStats:
    steps: int = 0
    episodes: int = 0
    policy_updates: int = 0
    estimator_updates: int = 0
    checkpoints: list[str] = field(default_factory=list)


def build_learner(cfg: RunConfig, rng: np.random.Generator) -> SACLearner:
    env = make_env(cfg.env, cfg.env_kwargs)
    sac_cfg = SACConfig(**cfg.sac)
    if cfg.mode == Mode.AGNOSTIC:
        ctx_dim = 0
    elif cfg.mode == Mode.ORACLE:
        ctx_dim = len(cfg.context_space())
    else:
        ctx_dim = cfg.resolved_latent_dim()
    return SACLearner(
        env.obs_dim, env.action_dim, env.action_bound, ctx_dim, sac_cfg, rng
    )


def build_context_model(cfg: RunConfig, rng: np.random.Generator) -> ContextModel | None:
    if cfg.mode != Mode.ESTIMATED:
        return None  # oracle/agnostic runs carry no estimator at all
    env = make_env(cfg.env, cfg.env_kwargs)
    return ContextModel(
        Strategy(cfg.strategy),
        cfg.arch_enum(),
        env.obs_dim,
        env.action_dim,
        len(cfg.context_space()),
        cfg.latent_dim,
        rng,
        lr=cfg.sac.get("lr", 3e-4),
    )


def save_checkpoint(
    path,
    step: int,
    config_hash: str,
    learner: SACLearner,
    ctx_model: ContextModel | None,
    rng_states: dict[str, dict],
) -> None:
    arrays: dict[str, np.ndarray] = {}
    opt_t: dict[str, int] = {}
    groups = dict(learner.param_groups())
    opts = dict(learner.opt_states())
    if ctx_model is not None:
        groups.update(ctx_model.param_groups())
        opts.update(ctx_model.opt_states())
    for gname, params in groups.items():
        for k, v in params.items():
            arrays[f"params/{gname}/{k}"] = v
    for gname, opt in opts.items():
        opt_t[gname] = opt.t
        for k, v in opt.m.items():
            arrays[f"opt/{gname}/m/{k}"] = v
        for k, v in opt.v.items():
            arrays[f"opt/{gname}/v/{k}"] = v
    meta = {
        "step": step,
        "config_hash": config_hash,
        "opt_t": opt_t,
        "rng": rng_states,
    }
    save_params(path, arrays, meta)


def load_checkpoint(path, expected_hash: str | None = None) -> tuple[dict, dict]:
    arrays, meta = load_params(path)
    if expected_hash is not None and meta.get("config_hash") != expected_hash:
        raise ConfigHashMismatch(
            f"{path}: checkpoint hash {meta.get('config_hash')!r} != "
            f"expected {expected_hash!r}"
        )
    return arrays, meta


def restore_checkpoint(
    arrays: dict,
    meta: dict,
    learner: SACLearner,
    ctx_model: ContextModel | None,
) -> None:
    """Load checkpoint arrays into freshly constructed models, in place."""
    groups = dict(learner.param_groups())
    opts = dict(learner.opt_states())
    if ctx_model is not None:
        groups.update(ctx_model.param_groups())
        opts.update(ctx_model.opt_states())
    for gname, params in groups.items():
        for k in params:
            src = arrays[f"params/{gname}/{k}"]
            if src.shape != params[k].shape:
                raise IntegrityError(
                    f"checkpoint shape {src.shape} != model shape "
                    f"{params[k].shape} for {gname}/{k}"
                )
            params[k][...] = src
    for gname, opt in opts.items():
        opt.t = int(meta["opt_t"][gname])
        for k in opt.m:
            opt.m[k][...] = arrays[f"opt/{gname}/m/{k}"]
            opt.v[k][...] = arrays[f"opt/{gname}/v/{k}"]


def _fmt(x) -> str:
    return repr(float(x))


def run_training(cfg: RunConfig, run_dir) -> TrainStats:
    """Execute one training run and write all of its artifacts under run_dir."""
    run_dir = Path(run_dir)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    cfg_hash = cfg.hash()
    (run_dir / "config.json").write_text(cfg.canonical_json())

    ss = np.random.SeedSequence(cfg.seed)
    init_ss, env_ss, action_ss, sampler_ss = ss.spawn(4)
    rng_init = np.random.default_rng(init_ss)
    rng_env = np.random.default_rng(env_ss)
    rng_action = np.random.default_rng(action_ss)
    rng_sampler = np.random.default_rng(sampler_ss)

    env = make_env(cfg.env, cfg.env_kwargs)
    space = cfg.context_space()
    contexts = [
        ContextVector(np.asarray(v), i, space) for i, v in enumerate(cfg.train_contexts)
    ]
    learner = build_learner(cfg, rng_init)
    ctx_model = build_context_model(cfg, rng_init)
    mode = Mode(cfg.mode)
    buffer = ReplayBuffer(
        cfg.buffer_capacity, env.obs_dim, env.action_dim, len(space)
    )
    ckpt_at = set(checkpoint_steps(cfg.total_steps, cfg.checkpoint_count,
                                   cfg.checkpoint_window))
    stats = TrainStats()
    n = cfg.n_context_transitions

    losses_f = open(run_dir / "losses.csv", "w")
    losses_f.write(f"# config_hash={cfg_hash}\n")
    losses_f.write("step,critic_loss,actor_loss,alpha,phi_loss,episode_return\n")
    episodes_f = open(run_dir / "train_contexts.csv", "w")
    episodes_f.write(f"# config_hash={cfg_hash}\n")
    episodes_f.write("episode,context_id,steps,return\n")

    step = 0
    episode = 0
    last_return = ""
    try:
        while step < cfg.total_steps:
            context = contexts[episode % len(contexts)]
            obs = env.reset(context, rng_env)
            ep_return = 0.0
            ep_steps = 0
            done = False
            while not done and step < cfg.total_steps:
                if mode == Mode.ESTIMATED:
                    cset = buffer.sample_context_set(
                        context.context_id, n, rng_sampler
                    )
                    c_e = ctx_model.estimate(cset)
                elif mode == Mode.ORACLE:
                    c_e = context.normalized()
                else:
                    c_e = None
                if step < cfg.warmup_steps:
                    action = rng_action.uniform(
                        -env.action_bound, env.action_bound, size=env.action_dim
                    )
                else:
                    action, _ = learner.act(
                        compose_policy_input(obs, mode, c_e), rng_action
                    )
                res = env.step(action)
                buffer.insert(
                    Transition(
                        s=obs,
                        a=action,
                        r=res.reward,
                        s2=res.observation,
                        done=res.terminated or res.failed,
                        context_id=context.context_id,
                        context=context,
                    )
                )
                obs = res.observation
                ep_return += res.reward
                ep_steps += 1
                step += 1
                done = res.done

                if step > cfg.warmup_steps:
                    batch = buffer.sample_minibatch(
                        learner.cfg.batch_size, rng_sampler
                    )
                    tape = Tape()
                    live = None
                    evars = None
                    c_hat = None
                    if mode == Mode.ESTIMATED:
                        sets = buffer.sample_context_sets(
                            batch.context_id, n, rng_sampler
                        )
                        evars = nets.leaves(tape, ctx_model.estimator)
                        c_hat = ctx_model.estimate_batch(tape, evars, sets)
                        ctx_in = c_hat.value
                        if ctx_model.strategy == Strategy.PL:
                            live = c_hat
                    elif mode == Mode.ORACLE:
                        ctx_in = batch.ctx
                    else:
                        ctx_in = None
                    losses = learner.update(
                        batch.s, batch.a, batch.r, batch.s2, batch.done,
                        rng=rng_sampler, ctx=ctx_in, live_ctx=live, tape=tape,
                    )
                    stats.policy_updates += 1
                    phi_loss = ""
                    if mode == Mode.ESTIMATED:
                        phi = ctx_model.supervision_update(
                            tape, evars, c_hat,
                            batch.s, batch.a, batch.s2, batch.ctx,
                            actor_loss_grads=losses.actor_grads,
                            actor_loss_value=losses.actor,
                        )
                        stats.estimator_updates += 1
                        phi_loss = _fmt(phi)
                    learner.soft_update()
                    losses_f.write(
                        f"{step},{_fmt(losses.critic)},{_fmt(losses.actor)},"
                        f"{_fmt(losses.alpha)},{phi_loss},{last_return}\n"
                    )

                if step in ckpt_at:
                    path = run_dir / "checkpoints" / f"step_{step:08d}.ckpt"
                    save_checkpoint(
                        path, step, cfg_hash, learner, ctx_model,
                        {
                            "env": _rng_state(rng_env),
                            "action": _rng_state(rng_action),
                            "sampler": _rng_state(rng_sampler),
                        },
                    )
                    stats.checkpoints.append(str(path))
            episodes_f.write(
                f"{episode},{context.context_id},{ep_steps},{_fmt(ep_return)}\n"
            )
            last_return = _fmt(ep_return)
            episode += 1
    except FloatingPointError as e:
        raise FloatingPointError(f"run aborted at step {step}: {e}") from e
    finally:
        losses_f.close()
        episodes_f.close()
    stats.steps = step
    stats.episodes = episode
    return stats
