"""FIFO replay buffer indexed by episodic context.

Two sampling modes: uniform minibatches over the whole buffer, and
context-matched sets of N transitions sharing one context id (used to feed
the context estimator).  Columnar numpy storage; single-writer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .spaces import ContextVector


class NotReadyError(RuntimeError):
    """Sampling was requested before any transition was stored."""


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s2: np.ndarray
    done: bool
    context_id: int
    context: Optional[ContextVector] = None
    episode_uid: Optional[int] = None

    def __post_init__(self):
        if np.asarray(self.s).shape != np.asarray(self.s2).shape:
            raise ValueError("s and s2 must have the same dimension")


@dataclass
class Batch:
    """Struct-of-arrays minibatch."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s2: np.ndarray
    done: np.ndarray
    context_id: np.ndarray
    ctx: np.ndarray  # normalized ground-truth context values

    def __len__(self) -> int:
        return self.s.shape[0]


@dataclass
class ContextSet:
    """N transitions sharing one context id; `n == 0` marks a cold start."""

    context_id: int
    s: np.ndarray
    a: np.ndarray
    s2: np.ndarray

    @classmethod
    def empty(cls, context_id: int) -> "ContextSet":
        z = np.zeros((0, 0))
        return cls(context_id, z, z, z)

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.n == 0

    def encoder_input(self) -> np.ndarray:
        """Per-transition estimator input rows (s, a, s2)."""
        return np.concatenate([self.s, self.a, self.s2], axis=1)


class _SlotQueue:
    """Append/popleft queue of buffer slots with O(1) random access."""

    def __init__(self):
        self._buf = np.empty(16, dtype=np.int64)
        self._head = 0
        self._tail = 0

    def __len__(self) -> int:
        return self._tail - self._head

    def append(self, v: int) -> None:
        if self._tail == len(self._buf):
            n = len(self)
            if self._head > len(self._buf) // 2:
                self._buf[:n] = self._buf[self._head : self._tail]
            else:
                new = np.empty(max(32, 2 * len(self._buf)), dtype=np.int64)
                new[:n] = self._buf[self._head : self._tail]
                self._buf = new
            self._head, self._tail = 0, n
        self._buf[self._tail] = v
        self._tail += 1

    def popleft(self) -> int:
        v = int(self._buf[self._head])
        self._head += 1
        return v

    def view(self) -> np.ndarray:
        return self._buf[self._head : self._tail]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self._buf[self._head + rng.integers(0, len(self), size=n)]


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, action_dim: int, ctx_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._s = np.zeros((capacity, obs_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, obs_dim))
        self._done = np.zeros(capacity)
        self._cid = np.full(capacity, -1, dtype=np.int64)
        self._ctx = np.zeros((capacity, ctx_dim))
        self._pos = 0
        self._size = 0
        self._index: dict[int, _SlotQueue] = {}

    def __len__(self) -> int:
        return self._size

    def insert(self, t: Transition) -> None:
        pos = self._pos
        if self._size == self.capacity:  # FIFO eviction updates the index too
            old_cid = int(self._cid[pos])
            q = self._index[old_cid]
            evicted = q.popleft()
            assert evicted == pos, "eviction order diverged from insert order"
            if len(q) == 0:
                del self._index[old_cid]
        self._s[pos] = t.s
        self._a[pos] = t.a
        self._r[pos] = t.r
        self._s2[pos] = t.s2
        self._done[pos] = float(t.done)
        self._cid[pos] = t.context_id
        if t.context is not None:
            self._ctx[pos] = t.context.normalized()
        self._index.setdefault(t.context_id, _SlotQueue()).append(pos)
        self._pos = (pos + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def context_count(self, context_id: int) -> int:
        q = self._index.get(context_id)
        return 0 if q is None else len(q)

    def _gather(self, idx: np.ndarray) -> Batch:
        return Batch(
            s=self._s[idx],
            a=self._a[idx],
            r=self._r[idx],
            s2=self._s2[idx],
            done=self._done[idx],
            context_id=self._cid[idx],
            ctx=self._ctx[idx],
        )

    def sample_minibatch(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform with replacement over the stored transitions."""
        if self._size == 0:
            raise NotReadyError("replay buffer is empty")
        idx = rng.integers(0, self._size, size=batch_size)
        return self._gather(idx)

    def sample_context_set(
        self, context_id: int, n: int, rng: np.random.Generator
    ) -> ContextSet:
        """N transitions with `context_id`, uniform with replacement.

        A context with no stored transitions yields the empty marker; the
        caller substitutes the zero context estimate.
        """
        q = self._index.get(context_id)
        if q is None or len(q) == 0:
            return ContextSet.empty(context_id)
        idx = q.sample(rng, n)
        return ContextSet(context_id, self._s[idx], self._a[idx], self._s2[idx])

    def sample_context_sets(
        self, context_ids: np.ndarray, n: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Per-row context sets for a whole minibatch.

        Returns estimator inputs of shape (B, n, obs+act+obs).  Draws are
        grouped by context id in ascending id order for determinism.
        """
        b = len(context_ids)
        feat = self._s.shape[1] * 2 + self._a.shape[1]
        out = np.empty((b, n, feat))
        order = np.argsort(context_ids, kind="stable")
        sorted_ids = context_ids[order]
        boundaries = np.flatnonzero(np.diff(sorted_ids)) + 1
        for rows in np.split(order, boundaries):
            cid = int(context_ids[rows[0]])
            q = self._index[cid]
            idx = q.sample(rng, len(rows) * n).reshape(len(rows), n)
            out[rows, :, : self._s.shape[1]] = self._s[idx]
            out[rows, :, self._s.shape[1] : self._s.shape[1] + self._a.shape[1]] = (
                self._a[idx]
            )
            out[rows, :, self._s.shape[1] + self._a.shape[1] :] = self._s2[idx]
        return out

    def scan_context_count(self, context_id: int) -> int:
        """Linear-scan count, used to cross-check the index."""
        return int(np.sum(self._cid[: self._size] == context_id))

    def dump(self, path) -> None:
        """Debug dump of the live contents in insertion-slot order."""
        from .serialize import save_params

        n = self._size
        save_params(
            path,
            {
                "s": self._s[:n],
                "a": self._a[:n],
                "r": self._r[:n],
                "s2": self._s2[:n],
                "done": self._done[:n],
                "context_id": self._cid[:n].astype(np.float64),
                "ctx": self._ctx[:n],
            },
            meta={"size": n, "capacity": self.capacity, "next_slot": self._pos},
        )
