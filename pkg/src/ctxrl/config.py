"""Experiment manifests and per-run configurations.

A manifest names an experiment: environment, varying context dimensions, the
policy matrix, seeds, and budgets.  Materialization fills in every default
explicitly so stored configs are self-documenting; a run config is one
(policy cell, seed) instantiation carrying the training context values.
Hashes are SHA-256 over canonical JSON and tag every artifact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .context import Arch, Mode, Strategy, latent_dim_for
from .envs.pendulum import pendulum_space
from .envs.pushing import _BOUNDS as PUSHING_BOUNDS
from .spaces import ConfigError, ContextSpace

POLICY_CELLS = {
    "oracle": {"mode": "oracle", "strategy": None, "arch": None},
    "agnostic": {"mode": "agnostic", "strategy": None, "arch": None},
    "gt_ff": {"mode": "estimated", "strategy": "gt", "arch": "ff_avg"},
    "gt_lstm": {"mode": "estimated", "strategy": "gt", "arch": "lstm"},
    "fp_ff": {"mode": "estimated", "strategy": "fp", "arch": "ff_avg"},
    "fp_lstm": {"mode": "estimated", "strategy": "fp", "arch": "lstm"},
    "pl_ff": {"mode": "estimated", "strategy": "pl", "arch": "ff_avg"},
    "pl_lstm": {"mode": "estimated", "strategy": "pl", "arch": "lstm"},
}

SAC_DEFAULTS = {
    "lr": 3e-4,
    "gamma": 0.99,
    "tau": 0.005,
    "batch_size": 256,
    "hidden": [256, 256],
    "target_entropy": None,
    "condition_critics": True,
    "init_log_alpha": 0.0,
}

ENV_DEFAULTS = {
    "pendulum": {
        "context_dims": ["gravity"],
        "total_steps": 100_000,
        "checkpoint_count": 50,
        "checkpoint_window": 0.75,
        "episodes_per_context": {"validation": 3, "test": 3},
        "env_kwargs": {"max_steps": 200},
    },
    "pushing": {
        "context_dims": ["mass", "friction_tool", "friction_table"],
        "total_steps": 1_000_000,
        "checkpoint_count": 200,
        "checkpoint_window": 0.5,
        "episodes_per_context": {"validation": 2, "test": 2},
        "env_kwargs": {
            "max_steps": 250,
            "goal": [0.50, 0.015],
            "reward_scale": 0.10,
            "fail_penalty": -50.0,
            "workspace": [0.2, 0.8, -0.2, 0.5],
            "max_push_force": 2.5,
        },
    },
}

MANIFEST_DEFAULTS = {
    "seeds": [0, 1, 2],
    "policies": ["oracle", "agnostic"],
    "set_sizes": {"train": 7, "validation": 7, "test": 7},
    "context_seed": 1000,
    "warmup_steps": 1000,
    "n_context_transitions": 10,
    "latent_dim": None,
    "buffer_capacity": 1_000_000,
    "baseline_policy": "agnostic",
}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def context_space_for(env: str, context_dims: list[str]) -> ContextSpace:
    if env == "pendulum":
        return pendulum_space(context_dims)
    if env == "pushing":
        for name in context_dims:
            if name not in PUSHING_BOUNDS:
                raise ConfigError(f"context_dims: unknown pushing dim {name!r}")
        return ContextSpace(
            tuple((n, *PUSHING_BOUNDS[n]) for n in context_dims)
        )
    raise ConfigError(f"env: unknown environment {env!r}")


def materialize_manifest(raw: dict) -> dict:
    """Validate a manifest and fill in every default explicitly."""
    if "name" not in raw:
        raise ConfigError("name: experiment manifest needs a name")
    env = raw.get("env", "pendulum")
    if env not in ENV_DEFAULTS:
        raise ConfigError(f"env: unknown environment {env!r}")
    m = {"name": raw["name"], "env": env}
    env_defaults = ENV_DEFAULTS[env]
    for key, default in {**MANIFEST_DEFAULTS, **env_defaults}.items():
        val = raw.get(key, default)
        if isinstance(default, dict) and isinstance(val, dict):
            val = {**default, **val}
        m[key] = val
    m["sac"] = {**SAC_DEFAULTS, **raw.get("sac", {})}
    unknown = set(raw) - set(m)
    if unknown:
        raise ConfigError(f"unknown manifest fields: {sorted(unknown)}")

    for cell in m["policies"]:
        if isinstance(cell, str) and cell not in POLICY_CELLS:
            raise ConfigError(
                f"policies: unknown policy cell {cell!r}; "
                f"known: {sorted(POLICY_CELLS)}"
            )
        if isinstance(cell, dict):
            _validate_cell_spec(cell)
    if m["baseline_policy"] not in [_cell_name(c) for c in m["policies"]]:
        raise ConfigError(
            f"baseline_policy: {m['baseline_policy']!r} is not in the policy matrix"
        )
    context_space_for(env, m["context_dims"])  # bounds check
    for split in ("train", "validation", "test"):
        if m["set_sizes"].get(split, 0) < 1:
            raise ConfigError(f"set_sizes.{split}: must be >= 1")
    if not m["seeds"]:
        raise ConfigError("seeds: need at least one seed")
    return m


def _validate_cell_spec(spec: dict) -> None:
    name = spec.get("name")
    if not name:
        raise ConfigError("policies: inline policy cells need a 'name'")
    try:
        mode = Mode(spec.get("mode", "estimated"))
    except ValueError:
        raise ConfigError(f"policies.{name}.mode: unknown mode {spec.get('mode')!r}")
    if mode == Mode.ESTIMATED:
        try:
            Strategy(spec.get("strategy"))
        except ValueError:
            raise ConfigError(
                f"policies.{name}.strategy: unknown strategy {spec.get('strategy')!r}"
            )
        try:
            Arch(spec.get("arch"))
        except ValueError:
            raise ConfigError(
                f"policies.{name}.arch: unknown estimator arch {spec.get('arch')!r}"
            )


def _cell_name(cell) -> str:
    return cell if isinstance(cell, str) else cell["name"]


def expand_cells(manifest: dict) -> list[tuple[str, dict]]:
    """(name, {mode, strategy, arch, latent_dim}) per policy-matrix cell."""
    cells = []
    for cell in manifest["policies"]:
        if isinstance(cell, str):
            spec = dict(POLICY_CELLS[cell])
            spec["latent_dim"] = manifest["latent_dim"]
            cells.append((cell, spec))
        else:
            spec = {
                "mode": cell.get("mode", "estimated"),
                "strategy": cell.get("strategy"),
                "arch": cell.get("arch"),
                "latent_dim": cell.get("latent_dim", manifest["latent_dim"]),
            }
            cells.append((cell["name"], spec))
    return cells


@dataclass
class RunConfig:
    """Everything one training run needs, with the context values baked in."""

    experiment: str
    cell: str
    env: str
    context_dims: list[str]
    mode: str
    strategy: Optional[str]
    arch: Optional[str]
    latent_dim: Optional[int]
    seed: int
    total_steps: int
    warmup_steps: int
    n_context_transitions: int
    buffer_capacity: int
    checkpoint_count: int
    checkpoint_window: float
    sac: dict
    env_kwargs: dict
    train_contexts: list[list[float]]
    manifest_hash: str

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "cell": self.cell,
            "env": self.env,
            "context_dims": list(self.context_dims),
            "mode": self.mode,
            "strategy": self.strategy,
            "arch": self.arch,
            "latent_dim": self.latent_dim,
            "seed": self.seed,
            "total_steps": self.total_steps,
            "warmup_steps": self.warmup_steps,
            "n_context_transitions": self.n_context_transitions,
            "buffer_capacity": self.buffer_capacity,
            "checkpoint_count": self.checkpoint_count,
            "checkpoint_window": self.checkpoint_window,
            "sac": self.sac,
            "env_kwargs": self.env_kwargs,
            "train_contexts": self.train_contexts,
            "manifest_hash": self.manifest_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**d)

    def canonical_json(self) -> str:
        return canonical_json(self.to_dict())

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def context_space(self) -> ContextSpace:
        return context_space_for(self.env, self.context_dims)

    def arch_enum(self) -> Optional[Arch]:
        return None if self.arch is None else Arch(self.arch)

    def resolved_latent_dim(self) -> int:
        return latent_dim_for(
            Strategy(self.strategy), len(self.context_space()), self.latent_dim
        )

    def validate(self) -> None:
        mode = Mode(self.mode)
        if mode == Mode.ESTIMATED:
            Strategy(self.strategy)
            Arch(self.arch)
            self.resolved_latent_dim()
        elif self.strategy is not None or self.arch is not None:
            raise ConfigError(
                f"cell {self.cell!r}: {mode.value} mode carries no estimator"
            )
        if self.total_steps < 1:
            raise ConfigError("total_steps: must be >= 1")
        if not 0.0 <= self.checkpoint_window < 1.0:
            raise ConfigError("checkpoint_window: must be in [0, 1)")
        if self.checkpoint_count < 1:
            raise ConfigError("checkpoint_count: must be >= 1")
        if self.n_context_transitions < 1:
            raise ConfigError("n_context_transitions: must be >= 1")
        space = self.context_space()
        for vals in self.train_contexts:
            if len(vals) != len(space):
                raise ConfigError("train_contexts: dimension mismatch")


def build_run_config(
    manifest: dict, cell_name: str, cell_spec: dict, seed: int,
    train_contexts: list[list[float]],
) -> RunConfig:
    cfg = RunConfig(
        experiment=manifest["name"],
        cell=cell_name,
        env=manifest["env"],
        context_dims=list(manifest["context_dims"]),
        mode=cell_spec["mode"],
        strategy=cell_spec["strategy"],
        arch=cell_spec["arch"],
        latent_dim=cell_spec.get("latent_dim"),
        seed=seed,
        total_steps=manifest["total_steps"],
        warmup_steps=manifest["warmup_steps"],
        n_context_transitions=manifest["n_context_transitions"],
        buffer_capacity=manifest["buffer_capacity"],
        checkpoint_count=manifest["checkpoint_count"],
        checkpoint_window=manifest["checkpoint_window"],
        sac=dict(manifest["sac"]),
        env_kwargs=dict(manifest["env_kwargs"]),
        train_contexts=[list(map(float, v)) for v in train_contexts],
        manifest_hash=config_hash(manifest),
    )
    cfg.validate()
    return cfg
