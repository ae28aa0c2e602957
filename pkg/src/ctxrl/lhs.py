"""Latin hypercube sampling of context sets."""

from __future__ import annotations

import numpy as np

from .spaces import ContextSpace, ContextVector


def lhs_sample(n: int, space: ContextSpace, seed: int) -> list[ContextVector]:
    """n points; each dimension's marginal hits each of n strata exactly once.

    Per dimension: one uniform draw inside every stratum, stratum order
    independently permuted.  Same seed, same set.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    cols = []
    for _, lo, hi in space.dims:
        perm = rng.permutation(n)
        u = rng.random(n)
        cols.append(lo + (perm + u) / n * (hi - lo))
    values = np.stack(cols, axis=1)
    return [ContextVector(values[i], i, space) for i in range(n)]
