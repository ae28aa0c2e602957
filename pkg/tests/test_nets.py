import numpy as np
import pytest

from ctxrl import nets
from ctxrl.nets import AdamState, adam_step, apply_network, init_lstm, init_mlp
from ctxrl.tensor import DimensionError

from fd_oracle import (
    finite_diff_grads,
    gradcheck,
    lstm_backprop,
    lstm_loss,
    mlp_backprop,
    mlp_loss,
)


def test_identity_affine_layer():
    net = nets.ParamSet(
        {"w0": np.eye(3), "b0": np.zeros(3)},
        {"kind": "mlp", "in_dim": 3, "hidden": [], "out_dim": 3,
         "activation": "relu"},
    )
    x = np.array([1.5, -2.0, 0.25])
    out, state = apply_network(net, x)
    assert state is None
    assert np.array_equal(out, x)


def test_zero_weight_relu_net_outputs_bias():
    rng = np.random.default_rng(0)
    net = init_mlp(rng, 4, [8, 8], 2)
    for k in net.params:
        net.params[k][...] = 0.0
    net.params["b2"][...] = [3.25, -1.5]
    for x in (np.zeros(4), rng.standard_normal(4), 100 * np.ones(4)):
        out, _ = apply_network(net, x)
        assert np.array_equal(out, [3.25, -1.5])


def test_zero_weight_lstm_all_zero_hidden():
    # gates sigmoid(0)=0.5, candidate tanh(0)=0 -> c1 = 0, h1 = 0
    net = init_lstm(np.random.default_rng(0), 5, 4, 3)
    for k in net.params:
        net.params[k][...] = 0.0
    out, (h, c) = apply_network(net, np.full(5, 7.0))
    assert np.all(out == 0.0) and np.all(h == 0.0) and np.all(c == 0.0)


def test_lstm_state_threading_matches_manual_gates():
    rng = np.random.default_rng(3)
    net = init_lstm(rng, 2, 3, 3)
    x1, x2 = rng.standard_normal(2), rng.standard_normal(2)
    out1, st1 = apply_network(net, x1)
    out2, _ = apply_network(net, x2, recurrent_state=st1)

    def sig(z):
        return 1.0 / (1.0 + np.exp(-z))

    h = np.zeros(3)
    c = np.zeros(3)
    for x in (x1, x2):
        z = x @ net.params["wx"] + h @ net.params["wh"] + net.params["b"]
        i, f, g, o = sig(z[:3]), sig(z[3:6]), np.tanh(z[6:9]), sig(z[9:])
        c = f * c + i * g
        h = o * np.tanh(c)
    expect = h @ net.params["proj_w"] + net.params["proj_b"]
    assert np.allclose(out2, expect, atol=1e-12)


def test_apply_network_width_mismatch():
    net = init_mlp(np.random.default_rng(0), 4, [8], 2)
    with pytest.raises(DimensionError):
        apply_network(net, np.zeros(5))


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    net = init_mlp(rng, 6, [16, 16], 4)
    x = rng.standard_normal((2, 6))
    proj = rng.standard_normal((4, 1))
    bp = mlp_backprop(net, x, proj)
    fd = finite_diff_grads(net, lambda n: mlp_loss(n, x, proj))
    n_ok, n_total, worst, all_pass = gradcheck(bp, fd)
    assert all_pass, f"worst relative error {worst}"
    assert n_ok / n_total >= 0.99


def test_lstm_gradients_match_finite_differences():
    rng = np.random.default_rng(13)
    net = init_lstm(rng, 4, 8, 3)
    xs = [rng.standard_normal((2, 4)) for _ in range(4)]
    proj = rng.standard_normal((3, 1))
    bp = lstm_backprop(net, xs, proj)
    fd = finite_diff_grads(net, lambda n: lstm_loss(n, xs, proj))
    n_ok, n_total, worst, all_pass = gradcheck(bp, fd)
    assert all_pass, f"worst relative error {worst}"
    assert n_ok / n_total >= 0.99


def test_adam_zero_gradient_keeps_params():
    rng = np.random.default_rng(5)
    net = init_mlp(rng, 3, [4], 2)
    before = {k: v.copy() for k, v in net.params.items()}
    st = AdamState.for_params(net.params)
    adam_step(net.params, {k: np.zeros_like(v) for k, v in net.params.items()}, st)
    assert st.t == 1
    for k in net.params:
        assert np.array_equal(net.params[k], before[k])


def test_adam_first_step_hand_value():
    p = {"x": np.array([0.0])}
    st = AdamState.for_params(p, lr=1e-3)
    adam_step(p, {"x": np.array([1.0])}, st)
    # m_hat = 1, v_hat = 1 -> delta = -lr / (1 + eps)
    assert p["x"][0] == pytest.approx(-9.99999990e-4, abs=1e-15)


def test_adam_two_steps_match_scalar_trace():
    # independent scalar recomputation of two updates with g = 0.5
    lr, b1, b2, eps, g = 1e-2, 0.9, 0.999, 1e-8, 0.5
    x = m = v = 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    p = {"x": np.array([0.0])}
    st = AdamState.for_params(p, lr=lr)
    for _ in range(2):
        adam_step(p, {"x": np.array([g])}, st)
    assert st.t == 2
    assert p["x"][0] == pytest.approx(x, abs=1e-15)


def test_adam_shape_mismatch():
    p = {"x": np.zeros(3)}
    st = AdamState.for_params(p)
    with pytest.raises(DimensionError):
        adam_step(p, {"x": np.zeros(4)}, st)
