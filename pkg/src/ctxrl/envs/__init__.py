"""Contextual environments with dynamics parameters drawn per episode."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EnvFault(RuntimeError):
    """Non-finite state or pose; the episode cannot continue."""


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool = False
    truncated: bool = False
    failed: bool = False

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated or self.failed


from .pendulum import PendulumEnv, pendulum_space  # noqa: E402
from .pushing import PushingEnv, pushing_space  # noqa: E402

__all__ = [
    "EnvFault",
    "StepResult",
    "PendulumEnv",
    "pendulum_space",
    "PushingEnv",
    "pushing_space",
]


def make_env(name: str, env_kwargs: dict | None = None):
    kw = env_kwargs or {}
    if name == "pendulum":
        return PendulumEnv(**kw)
    if name == "pushing":
        return PushingEnv(**kw)
    raise ValueError(f"unknown environment {name!r}")
