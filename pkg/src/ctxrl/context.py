"""Context estimation and the supervision strategies that train it.

The estimator maps a set of transitions sharing one episodic context to a
context representation: either a feed-forward encoder whose per-transition
embeddings are averaged (order-invariant), or an LSTM run over the set as a
sequence with a linear projection of the final hidden state.

Supervision:  GT regresses the normalized ground-truth context;  FP trains
the estimator jointly with a forward-dynamics predictor;  PL reuses the
actor loss, backpropagated into the estimator through the composed policy
input.  Under GT and FP the estimate fed to the policy is detached, so the
estimator is shaped only by its own signal.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import nets
from .nets import AdamState, adam_step
from .replay import ContextSet
from .sac import ContractMismatch
from .spaces import ConfigError
from .tensor import Tape, Var


class Mode(str, Enum):
    ORACLE = "oracle"
    AGNOSTIC = "agnostic"
    ESTIMATED = "estimated"


class Strategy(str, Enum):
    GT = "gt"
    FP = "fp"
    PL = "pl"


class Arch(str, Enum):
    FF_AVG = "ff_avg"
    LSTM = "lstm"


ESTIMATOR_HIDDEN = [16, 16]
LSTM_HIDDEN = 16
PREDICTOR_HIDDEN = [16, 16]


def compose_policy_input(s: np.ndarray, mode: Mode, c: Optional[np.ndarray]) -> np.ndarray:
    """Composed policy input: state alone, or state with context appended."""
    s = np.asarray(s, dtype=np.float64)
    if mode == Mode.AGNOSTIC:
        if c is not None:
            raise ContractMismatch("agnostic mode takes no context")
        return s
    if c is None:
        raise ContractMismatch(f"{mode.value} mode requires a context")
    return np.concatenate([s, np.asarray(c, dtype=np.float64)], axis=-1)


def latent_dim_for(strategy: Strategy, ctx_dim: int, latent_dim: Optional[int]) -> int:
    """GT estimates live in context space; FP/PL default to ctx_dim + 1."""
    if strategy == Strategy.GT:
        if latent_dim is not None and latent_dim != ctx_dim:
            raise ConfigError(
                f"gt supervision requires latent_dim == ctx_dim ({ctx_dim})"
            )
        return ctx_dim
    return ctx_dim + 1 if latent_dim is None else latent_dim


class ContextModel:
    """Estimator (and, for FP, predictor) with their optimizer states."""

    def __init__(
        self,
        strategy: Strategy,
        arch: Arch,
        obs_dim: int,
        action_dim: int,
        ctx_dim: int,
        latent_dim: Optional[int],
        rng: np.random.Generator,
        lr: float = 3e-4,
    ):
        self.strategy = strategy
        self.arch = arch
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.ctx_dim = ctx_dim
        self.latent_dim = latent_dim_for(strategy, ctx_dim, latent_dim)
        self.per_transition_dim = 2 * obs_dim + action_dim
        if arch == Arch.FF_AVG:
            self.estimator = nets.init_mlp(
                rng, self.per_transition_dim, ESTIMATOR_HIDDEN, self.latent_dim
            )
        else:
            self.estimator = nets.init_lstm(
                rng, self.per_transition_dim, LSTM_HIDDEN, self.latent_dim
            )
        self.predictor = None
        if strategy == Strategy.FP:
            self.predictor = nets.init_mlp(
                rng,
                obs_dim + action_dim + self.latent_dim,
                PREDICTOR_HIDDEN,
                obs_dim,
            )
            self.opt_predictor = AdamState.for_params(self.predictor.params, lr=lr)
        self.opt_estimator = AdamState.for_params(self.estimator.params, lr=lr)

    # -- estimation -----------------------------------------------------------

    def estimate_batch(
        self, tape: Tape, evars: dict[str, Var], sets: np.ndarray
    ) -> Var:
        """Estimate contexts for stacked sets of shape (B, N, per-transition).

        FF+AVG encodes every transition with the shared net and averages;
        the LSTM consumes the set in the order it was sampled.
        """
        if sets.ndim != 3 or sets.shape[2] != self.per_transition_dim:
            raise ConfigError(
                f"context sets have shape {sets.shape}, expected "
                f"(B, N, {self.per_transition_dim})"
            )
        slices = [tape.const(sets[:, i, :]) for i in range(sets.shape[1])]
        topo = self.estimator.topology
        if self.arch == Arch.FF_AVG:
            acc = None
            for x in slices:
                enc = nets.mlp_forward(tape, evars, topo, x)
                acc = enc if acc is None else tape.add(acc, enc)
            return tape.mul(acc, 1.0 / len(slices))
        out, _ = nets.lstm_forward(tape, evars, topo, slices)
        return out

    def estimate(self, cset: ContextSet) -> np.ndarray:
        """Inference-path estimate; the empty marker yields the zero context."""
        if cset.is_empty:
            return np.zeros(self.latent_dim)
        tape = Tape()
        evars = nets.consts(tape, self.estimator)
        rows = cset.encoder_input()
        out = self.estimate_batch(tape, evars, rows[None, :, :])
        return out.value[0]

    # -- supervision ------------------------------------------------------------

    def supervision_update(
        self,
        tape: Tape,
        evars: dict[str, Var],
        c_hat: Var,
        batch_s: np.ndarray,
        batch_a: np.ndarray,
        batch_s2: np.ndarray,
        batch_ctx: np.ndarray,
        actor_loss_grads: Optional[list] = None,
        actor_loss_value: float = np.nan,
    ) -> float:
        """One Adam step on the estimator per the active strategy.

        `c_hat` must be the live (non-detached) estimate produced on `tape`
        with `evars` as leaves.  For PL, `actor_loss_grads` is the backward
        table of the actor loss computed with `c_hat` routed into the policy.
        """
        if self.strategy == Strategy.GT:
            target = tape.const(batch_ctx)
            loss = tape.mean(
                tape.sum(tape.square(tape.sub(c_hat, target)), axis=1)
            )
            grads = tape.backward(loss)
            adam_step(
                self.estimator.params,
                {k: tape.grad(grads, v) for k, v in evars.items()},
                self.opt_estimator,
            )
            return float(loss.value)

        if self.strategy == Strategy.FP:
            pvars = nets.leaves(tape, self.predictor)
            x = tape.concat(
                [tape.const(batch_s), tape.const(batch_a), c_hat], axis=1
            )
            s2_hat = nets.mlp_forward(tape, pvars, self.predictor.topology, x)
            loss = tape.mean(
                tape.sum(tape.square(tape.sub(s2_hat, tape.const(batch_s2))), axis=1)
            )
            grads = tape.backward(loss)
            adam_step(
                self.estimator.params,
                {k: tape.grad(grads, v) for k, v in evars.items()},
                self.opt_estimator,
            )
            adam_step(
                self.predictor.params,
                {k: tape.grad(grads, v) for k, v in pvars.items()},
                self.opt_predictor,
            )
            return float(loss.value)

        # PL: the actor loss is the estimator loss
        if actor_loss_grads is None:
            raise ContractMismatch(
                "pl supervision needs the actor-loss backward table; "
                "was the estimate detached?"
            )
        grads = {k: tape.grad(actor_loss_grads, v) for k, v in evars.items()}
        if all(np.all(g == 0.0) for g in grads.values()):
            raise ContractMismatch(
                "pl supervision received zero gradients for every estimator "
                "parameter; the estimate was not routed into the policy input"
            )
        adam_step(self.estimator.params, grads, self.opt_estimator)
        return float(actor_loss_value)

    # -- checkpoint plumbing ------------------------------------------------------

    def param_groups(self) -> dict[str, dict[str, np.ndarray]]:
        groups = {"estimator": self.estimator.params}
        if self.predictor is not None:
            groups["predictor"] = self.predictor.params
        return groups

    def opt_states(self) -> dict[str, AdamState]:
        states = {"estimator": self.opt_estimator}
        if self.predictor is not None:
            states["predictor"] = self.opt_predictor
        return states
