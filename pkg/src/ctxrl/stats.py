"""Welch's t-test with a self-contained Student-t tail probability.

The two-sided p-value is I_x(df/2, 1/2) at x = df / (df + t^2), with the
regularized incomplete beta evaluated by the modified Lentz continued
fraction (absolute error well below 1e-8 at the tolerances used).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CF_MAX_ITER = 400
_CF_EPS = 1e-14
_CF_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a} b={b} x={x}")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for T ~ Student-t(df)."""
    if df <= 0:
        raise ValueError("df must be positive")
    x = df / (df + t * t)
    return betainc_reg(0.5 * df, 0.5, x)


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float
    undefined: bool = False

    @classmethod
    def make_undefined(cls) -> "WelchResult":
        return cls(t=float("nan"), df=float("nan"), p=float("nan"), undefined=True)


def welch_t_test(sample_a, sample_b) -> WelchResult:
    """Two-sided Welch's t-test.

    Returns the undefined marker when both samples are degenerate (zero
    variance); needs at least two observations per sample.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least 2 observations")
    va = float(np.var(a, ddof=1))
    vb = float(np.var(b, ddof=1))
    if va == 0.0 and vb == 0.0:
        return WelchResult.make_undefined()
    se2 = va / na + vb / nb
    t = (float(np.mean(a)) - float(np.mean(b))) / math.sqrt(se2)
    df = se2**2 / (
        (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
    )
    return WelchResult(t=t, df=df, p=student_t_sf2(t, df))
