"""Dynamics-parameter spaces and the vectors sampled from them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """A configured or supplied value violates its declared bounds."""


@dataclass(frozen=True)
class ContextSpace:
    """Named physical parameters with [lower, upper) SI bounds per dimension."""

    dims: tuple[tuple[str, float, float], ...]

    def __post_init__(self):
        names = [d[0] for d in self.dims]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate context dim names: {names}")
        for name, lo, hi in self.dims:
            if not lo < hi:
                raise ConfigError(f"dim {name!r}: lower {lo} must be < upper {hi}")

    @property
    def names(self) -> list[str]:
        return [d[0] for d in self.dims]

    @property
    def lower(self) -> np.ndarray:
        return np.array([d[1] for d in self.dims])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d[2] for d in self.dims])

    def __len__(self) -> int:
        return len(self.dims)

    def contains(self, values: np.ndarray) -> bool:
        v = np.asarray(values, dtype=np.float64)
        return bool(np.all(v >= self.lower) and np.all(v <= self.upper))

    def normalize(self, values: np.ndarray) -> np.ndarray:
        """Min-max map to [-1, 1] per dimension."""
        v = np.asarray(values, dtype=np.float64)
        lo, hi = self.lower, self.upper
        return 2.0 * (v - lo) / (hi - lo) - 1.0

    def denormalize(self, unit: np.ndarray) -> np.ndarray:
        u = np.asarray(unit, dtype=np.float64)
        lo, hi = self.lower, self.upper
        return lo + (u + 1.0) * 0.5 * (hi - lo)


@dataclass(frozen=True)
class ContextVector:
    """One point in a ContextSpace, tagged with its index in its source set."""

    values: np.ndarray
    context_id: int
    space: ContextSpace

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.shape != (len(self.space),):
            raise ConfigError(
                f"context has {v.shape} values for a {len(self.space)}-dim space"
            )
        if not self.space.contains(v):
            raise ConfigError(
                f"context {v} outside bounds {self.space.lower}..{self.space.upper}"
            )

    def normalized(self) -> np.ndarray:
        return self.space.normalize(self.values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.space.names, self.values.tolist()))
