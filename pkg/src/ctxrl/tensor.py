"""Dense float64 tensors with reverse-mode automatic differentiation.

Operations are recorded on a dynamically grown :class:`Tape`; node creation
order is a topological order, so the backward pass is a single reverse sweep.
Everything is plain numpy underneath (1-D or 2-D arrays, row-major, float64).
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Shapes of operands are incompatible."""


class ContractError(ValueError):
    """An operation precondition was violated (e.g. non-scalar loss)."""


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim > 2:
        raise DimensionError(f"tensors are limited to 2 dims, got shape {a.shape}")
    return a


def check_finite(a: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"non-finite values in {what}")
    return a


class Var:
    """Handle to one tape node."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.idx]

    @property
    def shape(self):
        return self.tape.values[self.idx].shape

    def __add__(self, other):
        return self.tape.add(self, other)

    def __sub__(self, other):
        return self.tape.sub(self, other)

    def __mul__(self, other):
        return self.tape.mul(self, other)

    def __neg__(self):
        return self.tape.neg(self)

    def __matmul__(self, other):
        return self.tape.matmul(self, other)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Ordered record of primitive operations for one forward computation.

    Single-owner, single-threaded.  ``leaf`` nodes are differentiation roots
    (parameters, live inputs); ``const`` nodes block gradient flow.  Backward
    visits nodes in reverse creation order exactly once and returns a dense
    gradient table; nodes not on a path to the loss keep a zero gradient.
    """

    def __init__(self):
        self.values: list[np.ndarray] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list[Optional[Callable]] = []
        self.requires: list[bool] = []

    def _node(self, value: np.ndarray, parents: tuple[int, ...], vjp) -> Var:
        req = any(self.requires[p] for p in parents)
        self.values.append(value)
        self.parents.append(parents if req else ())
        self.vjps.append(vjp if req else None)
        self.requires.append(req)
        return Var(self, len(self.values) - 1)

    def leaf(self, value) -> Var:
        v = _as_array(value)
        self.values.append(v)
        self.parents.append(())
        self.vjps.append(None)
        self.requires.append(True)
        return Var(self, len(self.values) - 1)

    def const(self, value) -> Var:
        v = _as_array(value)
        self.values.append(v)
        self.parents.append(())
        self.vjps.append(None)
        self.requires.append(False)
        return Var(self, len(self.values) - 1)

    def _wrap(self, x) -> Var:
        return x if isinstance(x, Var) else self.const(x)

    # -- primitives ---------------------------------------------------------

    def add(self, a, b) -> Var:
        a, b = self._wrap(a), self._wrap(b)
        va, vb = a.value, b.value

        def vjp(g):
            return (_unbroadcast(g, va.shape), _unbroadcast(g, vb.shape))

        return self._node(va + vb, (a.idx, b.idx), vjp)

    def sub(self, a, b) -> Var:
        a, b = self._wrap(a), self._wrap(b)
        va, vb = a.value, b.value

        def vjp(g):
            return (_unbroadcast(g, va.shape), _unbroadcast(-g, vb.shape))

        return self._node(va - vb, (a.idx, b.idx), vjp)

    def mul(self, a, b) -> Var:
        a, b = self._wrap(a), self._wrap(b)
        va, vb = a.value, b.value

        def vjp(g):
            return (_unbroadcast(g * vb, va.shape), _unbroadcast(g * va, vb.shape))

        return self._node(va * vb, (a.idx, b.idx), vjp)

    def neg(self, a) -> Var:
        a = self._wrap(a)
        return self._node(-a.value, (a.idx,), lambda g: (-g,))

    def matmul(self, a, b) -> Var:
        a, b = self._wrap(a), self._wrap(b)
        va, vb = a.value, b.value
        if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
            raise DimensionError(f"matmul shapes {va.shape} x {vb.shape}")

        def vjp(g):
            return (g @ vb.T, va.T @ g)

        return self._node(va @ vb, (a.idx, b.idx), vjp)

    def relu(self, a) -> Var:
        a = self._wrap(a)
        mask = a.value > 0.0
        return self._node(a.value * mask, (a.idx,), lambda g: (g * mask,))

    def tanh(self, a) -> Var:
        a = self._wrap(a)
        out = np.tanh(a.value)
        return self._node(out, (a.idx,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self, a) -> Var:
        a = self._wrap(a)
        out = 1.0 / (1.0 + np.exp(-a.value))
        return self._node(out, (a.idx,), lambda g: (g * out * (1.0 - out),))

    def exp(self, a) -> Var:
        a = self._wrap(a)
        out = np.exp(a.value)
        return self._node(out, (a.idx,), lambda g: (g * out,))

    def log(self, a) -> Var:
        a = self._wrap(a)
        va = a.value
        return self._node(np.log(va), (a.idx,), lambda g: (g / va,))

    def softplus(self, a) -> Var:
        # log(1 + e^x), computed as max(x, 0) + log1p(e^-|x|) for stability
        a = self._wrap(a)
        va = a.value
        out = np.maximum(va, 0.0) + np.log1p(np.exp(-np.abs(va)))
        sig = 1.0 / (1.0 + np.exp(-va))
        return self._node(out, (a.idx,), lambda g: (g * sig,))

    def square(self, a) -> Var:
        a = self._wrap(a)
        va = a.value
        return self._node(va * va, (a.idx,), lambda g: (g * 2.0 * va,))

    def clip(self, a, lo: float, hi: float) -> Var:
        # gradient is passed through inside [lo, hi] and zero outside
        a = self._wrap(a)
        va = a.value
        mask = (va >= lo) & (va <= hi)
        return self._node(np.clip(va, lo, hi), (a.idx,), lambda g: (g * mask,))

    def minimum(self, a, b) -> Var:
        # elementwise min; gradient follows the smaller operand (ties to `a`)
        a, b = self._wrap(a), self._wrap(b)
        va, vb = a.value, b.value
        take_a = va <= vb

        def vjp(g):
            return (
                _unbroadcast(g * take_a, va.shape),
                _unbroadcast(g * ~take_a, vb.shape),
            )

        return self._node(np.minimum(va, vb), (a.idx, b.idx), vjp)

    def concat(self, parts: Sequence[Var], axis: int = 1) -> Var:
        parts = [self._wrap(p) for p in parts]
        vals = [p.value for p in parts]
        widths = [v.shape[axis] for v in vals]
        splits = np.cumsum(widths)[:-1]

        def vjp(g):
            return tuple(np.split(g, splits, axis=axis))

        return self._node(
            np.concatenate(vals, axis=axis), tuple(p.idx for p in parts), vjp
        )

    def slice_cols(self, a, start: int, stop: int) -> Var:
        a = self._wrap(a)
        va = a.value
        if va.ndim != 2:
            raise DimensionError("slice_cols expects a 2-D tensor")

        def vjp(g):
            full = np.zeros_like(va)
            full[:, start:stop] = g
            return (full,)

        return self._node(va[:, start:stop], (a.idx,), vjp)

    def sum(self, a, axis: Optional[int] = None, keepdims: bool = False) -> Var:
        a = self._wrap(a)
        va = a.value

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, va.shape).copy(),)
            if not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, va.shape).copy(),)

        return self._node(va.sum(axis=axis, keepdims=keepdims), (a.idx,), vjp)

    def mean(self, a, axis: Optional[int] = None, keepdims: bool = False) -> Var:
        a = self._wrap(a)
        va = a.value
        n = va.size if axis is None else va.shape[axis]

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g / n, va.shape).copy(),)
            if not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g / n, va.shape).copy(),)

        return self._node(va.mean(axis=axis, keepdims=keepdims), (a.idx,), vjp)

    def detach(self, a: Var) -> Var:
        """Copy of `a` that blocks gradient flow."""
        return self.const(a.value)

    # -- backward -----------------------------------------------------------

    def backward(self, loss: Var) -> list[Optional[np.ndarray]]:
        """Gradient of a scalar loss w.r.t. every node, indexed by node id.

        Nodes the loss does not reach get ``None`` (read as exactly zero via
        :meth:`grad`).  The tape is left intact; multiple backward passes over
        the same tape are independent.
        """
        lv = self.values[loss.idx]
        if lv.size != 1:
            raise ContractError(f"loss must be scalar, got shape {lv.shape}")
        grads: list[Optional[np.ndarray]] = [None] * len(self.values)
        grads[loss.idx] = np.ones_like(lv)
        for nid in range(loss.idx, -1, -1):
            g = grads[nid]
            if g is None or not self.requires[nid]:
                continue
            vjp = self.vjps[nid]
            if vjp is None:
                continue
            for pid, pg in zip(self.parents[nid], vjp(g)):
                if not self.requires[pid]:
                    continue
                if grads[pid] is None:
                    grads[pid] = pg
                else:
                    grads[pid] = grads[pid] + pg
        return grads

    def grad(self, grads: list, var: Var) -> np.ndarray:
        """Gradient of `var` from a backward table; zeros if unreachable."""
        g = grads[var.idx]
        return np.zeros_like(self.values[var.idx]) if g is None else g
