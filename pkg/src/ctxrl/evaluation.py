"""Checkpoint evaluation over context sets and the validate-then-test protocol.

Episodes derive their rng from (run seed, checkpoint step, context id,
episode index), so results are independent of execution order and merge
deterministically.  Policies run in deterministic mode (squashed mean).
Evaluation-time context estimates come only from the current episode's own
transitions: the zero context before the first step, resampled with
replacement while fewer than N transitions exist, then the trailing N.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import nets
from .config import RunConfig
from .context import Mode, compose_policy_input
from .envs import EnvFault, make_env
from .replay import ContextSet
from .spaces import ContextVector
from .trainer import (
    build_context_model,
    build_learner,
    load_checkpoint,
    restore_checkpoint,
)


def derive_episode_rng(
    run_seed: int, ckpt_step: int, context_id: int, episode: int
) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((run_seed, ckpt_step, context_id, episode))
    )


@dataclass
class EpisodeResult:
    context_id: int
    episode: int
    ret: float
    steps: int
    success: bool
    failed: bool
    trace: Optional[list] = None
    estimates: Optional[list] = None  # per-step context estimates, when logged


@dataclass
class _Slot:
    """One in-flight evaluation episode."""

    env: object
    rng: np.random.Generator
    context: ContextVector
    episode: int
    uid: int
    obs: np.ndarray = None
    window: list = field(default_factory=list)  # (uid, encoder row)
    ret: float = 0.0
    steps: int = 0
    done: bool = False
    success: bool = False
    failed: bool = False
    trace: Optional[list] = None
    estimates: Optional[list] = None


class RandomPolicy:
    """Uniform-random actions within the bounds; used as a scripted baseline."""

    def __init__(self, action_dim: int, action_bound: float):
        self.action_dim = action_dim
        self.action_bound = action_bound

    def act_batch(self, slots: Sequence[_Slot]) -> np.ndarray:
        return np.stack(
            [
                s.rng.uniform(-self.action_bound, self.action_bound, self.action_dim)
                for s in slots
            ]
        )


class CheckpointPolicy:
    """Frozen checkpoint driving deterministic actions with episode-local
    context estimation."""

    def __init__(self, cfg: RunConfig, ckpt_path, record_estimates: bool = False):
        self.cfg = cfg
        rng = np.random.default_rng(0)  # placeholder init, overwritten below
        self.learner = build_learner(cfg, rng)
        self.ctx_model = build_context_model(cfg, rng)
        arrays, meta = load_checkpoint(ckpt_path, expected_hash=cfg.hash())
        restore_checkpoint(arrays, meta, self.learner, self.ctx_model)
        self.step = int(meta["step"])
        self.mode = Mode(cfg.mode)
        self.n = cfg.n_context_transitions
        self.record_estimates = record_estimates and self.mode == Mode.ESTIMATED

    def _episode_estimates(self, slots: Sequence[_Slot]) -> np.ndarray:
        n = self.n
        latent = self.ctx_model.latent_dim
        out = np.zeros((len(slots), latent))
        rows = []
        which = []
        for i, s in enumerate(slots):
            if not s.window:
                continue  # cold start: zero context
            assert all(uid == s.uid for uid, _ in s.window), (
                "evaluation context set leaked transitions from another episode"
            )
            mat = np.stack([r for _, r in s.window])
            k = mat.shape[0]
            if k < n:
                mat = mat[s.rng.integers(0, k, size=n)]
            else:
                mat = mat[-n:]
            rows.append(mat)
            which.append(i)
        if rows:
            from .tensor import Tape

            tape = Tape()
            evars = nets.consts(tape, self.ctx_model.estimator)
            est = self.ctx_model.estimate_batch(tape, evars, np.stack(rows))
            out[which] = est.value
        return out

    def act_batch(self, slots: Sequence[_Slot]) -> np.ndarray:
        obs = np.stack([s.obs for s in slots])
        if self.mode == Mode.AGNOSTIC:
            composed = obs
        elif self.mode == Mode.ORACLE:
            ctx = np.stack([s.context.normalized() for s in slots])
            composed = np.concatenate([obs, ctx], axis=1)
        else:
            estimates = self._episode_estimates(slots)
            if self.record_estimates:
                for s, est in zip(slots, estimates):
                    if s.estimates is None:
                        s.estimates = []
                    s.estimates.append(est.copy())
            composed = np.concatenate([obs, estimates], axis=1)
        actions, _ = self.learner.act(composed, deterministic=True)
        return actions


def evaluate(
    policy,
    env_name: str,
    env_kwargs: dict,
    contexts: Sequence[ContextVector],
    episodes_per_context: int,
    run_seed: int,
    ckpt_step: int,
    collect_traces: bool = False,
) -> list[EpisodeResult]:
    """Run every (context, episode) pair to completion in lockstep.

    An environment fault marks the episode failed with the environment's
    failure penalty applied, and the remaining episodes continue.
    """
    slots = []
    uid = 0
    for c in contexts:
        for e in range(episodes_per_context):
            env = make_env(env_name, env_kwargs)
            rng = derive_episode_rng(run_seed, ckpt_step, c.context_id, e)
            slot = _Slot(env=env, rng=rng, context=c, episode=e, uid=uid)
            slot.obs = env.reset(c, rng)
            if collect_traces:
                slot.trace = []
            slots.append(slot)
            uid += 1

    active = [s for s in slots if not s.done]
    while active:
        actions = policy.act_batch(active)
        for slot, action in zip(active, actions):
            try:
                res = slot.env.step(action)
            except EnvFault:
                slot.failed = True
                slot.done = True
                slot.ret += getattr(slot.env, "fail_penalty", 0.0)
                continue
            row = np.concatenate([slot.obs, action, res.observation])
            slot.window.append((slot.uid, row))
            if slot.trace is not None:
                slot.trace.append(
                    {
                        "step": slot.steps,
                        "observation": slot.obs.tolist(),
                        "action": np.asarray(action).tolist(),
                        "reward": res.reward,
                        "terminated": res.terminated,
                        "truncated": res.truncated,
                        "failed": res.failed,
                        "pose": slot.env.true_pose.tolist()
                        if hasattr(slot.env, "true_pose")
                        else None,
                    }
                )
            slot.obs = res.observation
            slot.ret += res.reward
            slot.steps += 1
            if res.done:
                slot.done = True
                slot.success = res.terminated
                slot.failed = res.failed
        active = [s for s in active if not s.done]

    return [
        EpisodeResult(
            context_id=s.context.context_id,
            episode=s.episode,
            ret=s.ret,
            steps=s.steps,
            success=s.success,
            failed=s.failed,
            trace=s.trace,
            estimates=s.estimates,
        )
        for s in sorted(slots, key=lambda s: (s.context.context_id, s.episode))
    ]


@dataclass(frozen=True)
class CheckpointScore:
    step: int
    mean_return: float
    path: str


def score_checkpoints(
    cfg: RunConfig,
    ckpt_paths: Sequence[str],
    contexts: Sequence[ContextVector],
    episodes_per_context: int,
    jobs: int = 1,
) -> list[CheckpointScore]:
    """Mean return of every checkpoint over a context set."""

    def one(path) -> CheckpointScore:
        policy = CheckpointPolicy(cfg, path)
        results = evaluate(
            policy,
            cfg.env,
            cfg.env_kwargs,
            contexts,
            episodes_per_context,
            run_seed=cfg.seed,
            ckpt_step=policy.step,
        )
        return CheckpointScore(
            step=policy.step,
            mean_return=float(np.mean([r.ret for r in results])),
            path=str(path),
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(one, ckpt_paths))
    else:
        scores = [one(p) for p in ckpt_paths]
    return sorted(scores, key=lambda s: s.step)


def select_best_checkpoint(scores: Sequence[CheckpointScore]) -> CheckpointScore:
    """Highest validation mean; ties break toward the later training step."""
    if not scores:
        raise ValueError("no checkpoints to select from")
    return max(scores, key=lambda s: (s.mean_return, s.step))
