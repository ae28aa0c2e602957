"""Replay buffer with context-matched sampling feeding the estimator.

Run: python3 demos/04_replay_and_context_sets.py
"""

import numpy as np

from ctxrl.context import Arch, ContextModel, Strategy
from ctxrl.replay import ReplayBuffer, Transition
from ctxrl.spaces import ContextSpace, ContextVector

rng = np.random.default_rng(0)
space = ContextSpace((("gravity", 1.0, 20.0),))
buf = ReplayBuffer(capacity=1000, obs_dim=3, action_dim=1, ctx_dim=1)

print("== filling the buffer from three simulated episodes ==")
for cid, g in enumerate((3.0, 10.0, 17.0)):
    ctx = ContextVector(np.array([g]), cid, space)
    for _ in range(30):
        buf.insert(Transition(
            s=rng.standard_normal(3), a=rng.uniform(-2, 2, 1),
            r=float(rng.standard_normal()), s2=rng.standard_normal(3),
            done=False, context_id=cid, context=ctx,
        ))
print(f"stored {len(buf)} transitions over 3 contexts")

print("\n== the two sampling modes ==")
batch = buf.sample_minibatch(6, rng)
print(f"uniform minibatch context ids: {batch.context_id.tolist()}")
cset = buf.sample_context_set(1, 10, rng)
print(f"context set for id 1: n={cset.n}, homogeneous: "
      f"{np.all(buf._cid[:len(buf)][buf._s[:len(buf), 0] == cset.s[0, 0]] == 1)}")

print("\n== cold start: unseen context yields the empty marker ==")
empty = buf.sample_context_set(99, 10, rng)
model = ContextModel(Strategy.FP, Arch.LSTM, 3, 1, 1, None, rng)
print(f"empty marker: {empty.is_empty}; estimate: {model.estimate(empty)}")

print("\n== estimates from real sets ==")
for cid in range(3):
    est = model.estimate(buf.sample_context_set(cid, 10, rng))
    print(f"context {cid}: estimate {np.round(est, 3)}")
print("(untrained estimator: values are arbitrary but deterministic)")
