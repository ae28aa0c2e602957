"""Torque-controlled pendulum with randomized gravity, length, and mass.

Frictionless rigid-pendulum update with the angle measured from upright;
reward penalizes angle, angular velocity, and torque on the pre-step state.
"""

from __future__ import annotations

import numpy as np

from ..spaces import ConfigError, ContextSpace, ContextVector
from . import EnvFault, StepResult

STANDARD = {"gravity": 10.0, "length": 1.0, "mass": 1.0}

DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0


def pendulum_space(varying: list[str]) -> ContextSpace:
    """Context space over the chosen subset of {gravity, length, mass}.

    Bounds are 0.1x to 2x the standard value of each parameter.
    """
    dims = []
    for name in varying:
        if name not in STANDARD:
            raise ConfigError(f"unknown pendulum context dim {name!r}")
        std = STANDARD[name]
        dims.append((name, 0.1 * std, 2.0 * std))
    return ContextSpace(tuple(dims))


def wrap_angle(theta: float) -> float:
    """Wrap to [-pi, pi)."""
    return ((theta + np.pi) % (2.0 * np.pi)) - np.pi


class PendulumEnv:
    """Swing-up task; episodes truncate at `max_steps`, never terminate."""

    obs_dim = 3
    action_dim = 1
    action_bound = MAX_TORQUE

    def __init__(self, max_steps: int = 200):
        self.max_steps = max_steps
        self.theta = 0.0
        self.theta_dot = 0.0
        self._g = STANDARD["gravity"]
        self._l = STANDARD["length"]
        self._m = STANDARD["mass"]
        self._steps = 0

    def _observation(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])

    def reset(self, context: ContextVector, rng: np.random.Generator) -> np.ndarray:
        params = dict(STANDARD)
        params.update(context.as_dict())
        self._g, self._l, self._m = params["gravity"], params["length"], params["mass"]
        self.theta = rng.uniform(-np.pi, np.pi)
        self.theta_dot = rng.uniform(-1.0, 1.0)
        self._steps = 0
        return self._observation()

    def step(self, action: np.ndarray) -> StepResult:
        u = float(np.clip(np.asarray(action).reshape(-1)[0], -MAX_TORQUE, MAX_TORQUE))
        th, thd = self.theta, self.theta_dot
        if not (np.isfinite(th) and np.isfinite(thd)):
            raise EnvFault(f"pendulum state non-finite: theta={th}, theta_dot={thd}")
        cost = wrap_angle(th) ** 2 + 0.1 * thd**2 + 0.001 * u**2
        g, l, m = self._g, self._l, self._m
        thd_new = thd + (1.5 * g / l * np.sin(th) + 3.0 / (m * l * l) * u) * DT
        thd_new = float(np.clip(thd_new, -MAX_SPEED, MAX_SPEED))
        self.theta = th + thd_new * DT
        self.theta_dot = thd_new
        self._steps += 1
        return StepResult(
            observation=self._observation(),
            reward=-cost,
            truncated=self._steps >= self.max_steps,
        )
