"""Feed-forward and LSTM networks over the autodiff tape, plus Adam.

A :class:`ParamSet` is a named map of float64 arrays together with a topology
descriptor.  Forward passes come in two flavours: tape builders (``*_forward``)
used inside training updates, and :func:`apply_network` for plain inference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensor import DimensionError, Tape, Var

_ACTIVATIONS = {"relu", "tanh"}


@dataclass
class ParamSet:
    """Named parameter arrays plus the layer topology they realize.

    topology keys: ``kind`` ("mlp" | "lstm"), ``in_dim``, ``out_dim``,
    ``hidden`` (list of widths for mlp, int for lstm), ``activation``.
    """

    params: dict[str, np.ndarray]
    topology: dict

    def __post_init__(self):
        if len(set(self.params)) != len(self.params):
            raise ValueError("duplicate parameter names")
        check_topology(self)

    def copy(self) -> "ParamSet":
        return ParamSet({k: v.copy() for k, v in self.params.items()}, dict(self.topology))

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())


def check_topology(net: ParamSet) -> None:
    topo = net.topology
    kind = topo["kind"]
    if kind == "mlp":
        widths = [topo["in_dim"], *topo["hidden"], topo["out_dim"]]
        if topo["activation"] not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {topo['activation']!r}")
        for i in range(len(widths) - 1):
            w, b = net.params[f"w{i}"], net.params[f"b{i}"]
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise DimensionError(
                    f"layer {i}: expected {(widths[i], widths[i+1])}, got {w.shape}"
                )
    elif kind == "lstm":
        d, h, out = topo["in_dim"], topo["hidden"], topo["out_dim"]
        shapes = {
            "wx": (d, 4 * h),
            "wh": (h, 4 * h),
            "b": (4 * h,),
            "proj_w": (h, out),
            "proj_b": (out,),
        }
        for name, shape in shapes.items():
            if net.params[name].shape != shape:
                raise DimensionError(
                    f"{name}: expected {shape}, got {net.params[name].shape}"
                )
    else:
        raise ValueError(f"unknown network kind {kind!r}")


def _uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


def init_mlp(
    rng: np.random.Generator,
    in_dim: int,
    hidden: list[int],
    out_dim: int,
    activation: str = "relu",
) -> ParamSet:
    """Fan-in uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer."""
    widths = [in_dim, *hidden, out_dim]
    params = {}
    for i in range(len(widths) - 1):
        bound = 1.0 / np.sqrt(widths[i])
        params[f"w{i}"] = _uniform(rng, (widths[i], widths[i + 1]), bound)
        params[f"b{i}"] = _uniform(rng, (widths[i + 1],), bound)
    topo = {"kind": "mlp", "in_dim": in_dim, "hidden": list(hidden),
            "out_dim": out_dim, "activation": activation}
    return ParamSet(params, topo)


def init_lstm(
    rng: np.random.Generator, in_dim: int, hidden: int, out_dim: int
) -> ParamSet:
    """Single-layer LSTM (gates i,f,g,o) with a linear output projection."""
    bound = 1.0 / np.sqrt(hidden)
    params = {
        "wx": _uniform(rng, (in_dim, 4 * hidden), bound),
        "wh": _uniform(rng, (hidden, 4 * hidden), bound),
        "b": _uniform(rng, (4 * hidden,), bound),
        "proj_w": _uniform(rng, (hidden, out_dim), bound),
        "proj_b": _uniform(rng, (out_dim,), bound),
    }
    topo = {"kind": "lstm", "in_dim": in_dim, "hidden": hidden, "out_dim": out_dim}
    return ParamSet(params, topo)


def leaves(tape: Tape, net: ParamSet) -> dict[str, Var]:
    """Wrap every parameter as a differentiation root on `tape`."""
    return {name: tape.leaf(v) for name, v in net.params.items()}


def consts(tape: Tape, net: ParamSet) -> dict[str, Var]:
    """Wrap parameters as constants (no gradients computed through them)."""
    return {name: tape.const(v) for name, v in net.params.items()}


def mlp_forward(tape: Tape, vars: dict[str, Var], topo: dict, x: Var) -> Var:
    if x.value.ndim != 2 or x.value.shape[1] != topo["in_dim"]:
        raise DimensionError(
            f"mlp input width {x.value.shape} != in_dim {topo['in_dim']}"
        )
    act = tape.relu if topo["activation"] == "relu" else tape.tanh
    h = x
    n_layers = len(topo["hidden"]) + 1
    for i in range(n_layers):
        h = tape.add(tape.matmul(h, vars[f"w{i}"]), vars[f"b{i}"])
        if i < n_layers - 1:
            h = act(h)
    return h


def lstm_step(
    tape: Tape, vars: dict[str, Var], topo: dict, x: Var, h: Var, c: Var
) -> tuple[Var, Var]:
    """One LSTM cell step; returns (h', c')."""
    nh = topo["hidden"]
    if x.value.shape[1] != topo["in_dim"]:
        raise DimensionError(
            f"lstm input width {x.value.shape[1]} != in_dim {topo['in_dim']}"
        )
    z = tape.add(
        tape.add(tape.matmul(x, vars["wx"]), tape.matmul(h, vars["wh"])), vars["b"]
    )
    i = tape.sigmoid(tape.slice_cols(z, 0, nh))
    f = tape.sigmoid(tape.slice_cols(z, nh, 2 * nh))
    g = tape.tanh(tape.slice_cols(z, 2 * nh, 3 * nh))
    o = tape.sigmoid(tape.slice_cols(z, 3 * nh, 4 * nh))
    c_new = tape.add(tape.mul(f, c), tape.mul(i, g))
    h_new = tape.mul(o, tape.tanh(c_new))
    return h_new, c_new


def lstm_forward(
    tape: Tape,
    vars: dict[str, Var],
    topo: dict,
    xs: list[Var],
    state: Optional[tuple[Var, Var]] = None,
) -> tuple[Var, tuple[Var, Var]]:
    """Run a sequence through the LSTM; output = projection of final hidden."""
    batch = xs[0].value.shape[0]
    if state is None:
        zeros = np.zeros((batch, topo["hidden"]))
        h, c = tape.const(zeros), tape.const(zeros.copy())
    else:
        h, c = state
    for x in xs:
        h, c = lstm_step(tape, vars, topo, x, h, c)
    out = tape.add(tape.matmul(h, vars["proj_w"]), vars["proj_b"])
    return out, (h, c)


def apply_network(net: ParamSet, x: np.ndarray, recurrent_state=None):
    """Inference-path forward pass.

    MLP: returns (output, None).  LSTM: treats `x` as one sequence element and
    returns (projected hidden, (h, c)); pass the returned state back in to
    continue the sequence.  Accepts 1-D (single sample) or 2-D (batch) input.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    tape = Tape()
    xv = tape.const(x)
    if net.topology["kind"] == "mlp":
        out = mlp_forward(tape, consts(tape, net), net.topology, xv)
        return (out.value[0] if squeeze else out.value), None
    h_c = None
    if recurrent_state is not None:
        h, c = recurrent_state
        h_c = (tape.const(np.atleast_2d(h)), tape.const(np.atleast_2d(c)))
    out, (h, c) = lstm_forward(tape, consts(tape, net), net.topology, [xv], h_c)
    hv, cv = h.value, c.value
    if squeeze:
        return out.value[0], (hv[0], cv[0])
    return out.value, (hv, cv)


@dataclass
class AdamState:
    """First/second moments mirroring a ParamSet, plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], lr: float = 3e-4,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update with bias correction; mutates params/state in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(
                f"grad shape {g.shape} != param shape {p.shape} for {name!r}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
