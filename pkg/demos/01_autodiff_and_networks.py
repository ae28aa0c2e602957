"""Tour of the float64 autodiff core: tape, gradients, LSTM, and Adam.

Run: python3 demos/01_autodiff_and_networks.py
"""

import numpy as np

from ctxrl import nets
from ctxrl.nets import AdamState, adam_step, apply_network
from ctxrl.tensor import Tape

rng = np.random.default_rng(0)

print("== reverse-mode gradients on a recorded tape ==")
tape = Tape()
x = tape.leaf(np.array([3.0]))
loss = tape.sum(tape.square(x))  # loss = x^2
grads = tape.backward(loss)
print(f"d(x^2)/dx at x=3: {tape.grad(grads, x)[0]}  (analytic: 6)")

print("\n== MLP gradient vs central finite differences ==")
net = nets.init_mlp(rng, 4, [8, 8], 2, activation="tanh")
xb = rng.standard_normal((3, 4))


def forward_loss():
    t = Tape()
    out = nets.mlp_forward(t, nets.consts(t, net), net.topology, t.const(xb))
    return float(t.mean(t.square(out)).value)


tape = Tape()
vars = nets.leaves(tape, net)
out = nets.mlp_forward(tape, vars, net.topology, tape.const(xb))
grads = tape.backward(tape.mean(tape.square(out)))
w = net.params["w1"]
h = 1e-5
w[0, 0] += h
up = forward_loss()
w[0, 0] -= 2 * h
down = forward_loss()
w[0, 0] += h
fd = (up - down) / (2 * h)
bp = tape.grad(grads, vars["w1"])[0, 0]
print(f"w1[0,0]: backprop {bp:.10f}  finite diff {fd:.10f}")

print("\n== LSTM over a sequence (state threading) ==")
lstm = nets.init_lstm(rng, 3, 8, 2)
state = None
for t_step in range(4):
    out, state = apply_network(lstm, rng.standard_normal(3), recurrent_state=state)
print(f"projected output after 4 steps: {out}")

print("\n== Adam on a toy quadratic: minimize (w - 2)^2 ==")
params = {"w": np.array([10.0])}
opt = AdamState.for_params(params, lr=0.1)
for i in range(200):
    g = 2.0 * (params["w"] - 2.0)
    adam_step(params, {"w": g}, opt)
print(f"after 200 steps: w = {params['w'][0]:.4f}  (target 2.0)")
