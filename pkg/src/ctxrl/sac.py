"""Soft actor-critic over composed (state, context) inputs.

Twin critics with Polyak-averaged targets, a squashed-Gaussian actor, and
automatic temperature tuning.  The actor loss is the policy objective that
the policy-loss supervision strategy reuses as its training signal, so the
update exposes its backward table for gradient harvesting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nets
from .nets import AdamState, ParamSet, adam_step
from .spaces import ConfigError
from .tensor import DimensionError, Tape, Var

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class ContractMismatch(ValueError):
    """Conditioning-mode wiring does not match the learner construction."""


@dataclass
class SACConfig:
    lr: float = 3e-4
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 256
    hidden: tuple[int, int] = (256, 256)
    target_entropy: Optional[float] = None  # default: -action_dim
    condition_critics: bool = True
    init_log_alpha: float = 0.0


@dataclass
class SACLosses:
    critic: float
    actor: float
    alpha_loss: float
    alpha: float
    actor_grads: list = field(repr=False, default=None)
    tape: Tape = field(repr=False, default=None)


class SACLearner:
    """Single-threaded learner; parameter snapshots may be shared read-only."""

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        action_bound: float,
        ctx_dim: int,
        cfg: SACConfig,
        rng: np.random.Generator,
    ):
        if ctx_dim < 0:
            raise ConfigError("ctx_dim must be >= 0")
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.action_bound = float(action_bound)
        self.ctx_dim = ctx_dim
        self.cfg = cfg
        self.input_dim = obs_dim + ctx_dim  # composed policy-input width
        critic_in = obs_dim + (ctx_dim if cfg.condition_critics else 0) + action_dim

        h = list(cfg.hidden)
        self.actor = nets.init_mlp(rng, self.input_dim, h, 2 * action_dim)
        self.critic1 = nets.init_mlp(rng, critic_in, h, 1)
        self.critic2 = nets.init_mlp(rng, critic_in, h, 1)
        self.target1 = self.critic1.copy()
        self.target2 = self.critic2.copy()
        self.log_alpha = {"log_alpha": np.array([cfg.init_log_alpha])}
        self.target_entropy = (
            float(cfg.target_entropy)
            if cfg.target_entropy is not None
            else -float(action_dim)
        )
        self.opt_actor = AdamState.for_params(self.actor.params, lr=cfg.lr)
        self.opt_critic1 = AdamState.for_params(self.critic1.params, lr=cfg.lr)
        self.opt_critic2 = AdamState.for_params(self.critic2.params, lr=cfg.lr)
        self.opt_alpha = AdamState.for_params(self.log_alpha, lr=cfg.lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha["log_alpha"][0]))

    # -- tape builders -------------------------------------------------------

    def _policy(
        self,
        tape: Tape,
        avars: dict[str, Var],
        x: Var,
        eps: Optional[np.ndarray],
    ) -> tuple[Var, Var]:
        """Squashed-Gaussian head; `eps=None` means deterministic (mean) mode.

        Returns (action, per-sample log-density (B, 1)).
        """
        out = nets.mlp_forward(tape, avars, self.actor.topology, x)
        da = self.action_dim
        mu = tape.slice_cols(out, 0, da)
        log_std = tape.clip(tape.slice_cols(out, da, 2 * da), LOG_STD_MIN, LOG_STD_MAX)
        std = tape.exp(log_std)
        if eps is None:
            u = mu
            z = tape.const(np.zeros_like(mu.value))
        else:
            e = tape.const(eps)
            u = tape.add(mu, tape.mul(std, e))
            z = e
        action = tape.mul(tape.tanh(u), self.action_bound)
        # log N(u; mu, std) - sum log(bound * (1 - tanh(u)^2)), with the tanh
        # term computed as 2*(log 2 - u - softplus(-2u)) for stability
        gauss = tape.sub(
            tape.mul(tape.square(z), -0.5),
            tape.add(log_std, _HALF_LOG_2PI),
        )
        corr = tape.mul(
            tape.add(tape.sub(tape.softplus(tape.mul(u, -2.0)), np.log(2.0)), u),
            2.0,
        )
        per_dim = tape.add(tape.sub(gauss, np.log(self.action_bound)), corr)
        log_prob = tape.sum(per_dim, axis=1, keepdims=True)
        return action, log_prob

    def _critic(self, tape, cvars, net, x: Var, a: Var) -> Var:
        q = nets.mlp_forward(
            tape, cvars, net.topology, tape.concat([x, a], axis=1)
        )
        return q

    def _compose(self, tape: Tape, s: np.ndarray, ctx) -> Var:
        """Composed policy input: observation with the context appended."""
        sv = tape.const(s)
        if self.ctx_dim == 0:
            if ctx is not None:
                raise ContractMismatch("agnostic learner got a context input")
            return sv
        if ctx is None:
            raise ContractMismatch("conditioned learner needs a context input")
        cv = ctx if isinstance(ctx, Var) else tape.const(ctx)
        if cv.value.shape[1] != self.ctx_dim:
            raise DimensionError(
                f"context width {cv.value.shape[1]} != expected {self.ctx_dim}"
            )
        return tape.concat([sv, cv], axis=1)

    def _critic_input(self, tape: Tape, s: np.ndarray, ctx) -> Var:
        if self.cfg.condition_critics and self.ctx_dim > 0:
            return self._compose(tape, s, ctx)
        return tape.const(s)

    # -- public ops -----------------------------------------------------------

    def act(
        self,
        composed: np.ndarray,
        rng: Optional[np.random.Generator] = None,
        deterministic: bool = False,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Action and log-density for a composed observation (1-D or 2-D)."""
        x = np.asarray(composed, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise DimensionError(
                f"composed input width {x.shape[1]} != expected {self.input_dim}"
            )
        tape = Tape()
        eps = None
        if not deterministic:
            eps = rng.standard_normal((x.shape[0], self.action_dim))
        a, lp = self._policy(
            tape, nets.consts(tape, self.actor), tape.const(x), eps
        )
        if squeeze:
            return a.value[0], lp.value[0]
        return a.value, lp.value

    def update(
        self,
        s: np.ndarray,
        a: np.ndarray,
        r: np.ndarray,
        s2: np.ndarray,
        done: np.ndarray,
        rng: np.random.Generator,
        ctx: Optional[np.ndarray] = None,
        live_ctx: Optional[Var] = None,
        tape: Optional[Tape] = None,
    ) -> SACLosses:
        """One gradient step on critics, actor, and temperature.

        `ctx` is the detached per-transition context fed to critics, targets,
        and (unless `live_ctx` is given) the actor.  `live_ctx`, when present,
        is a tape variable routed into the actor's composed input so that the
        actor loss reaches whatever produced it.
        """
        if tape is None:
            tape = Tape()
        b = s.shape[0]
        gamma = self.cfg.gamma

        # target values, gradient-free
        eps2 = rng.standard_normal((b, self.action_dim))
        x2 = self._compose(tape, s2, ctx)
        a2, lp2 = self._policy(tape, nets.consts(tape, self.actor), x2, eps2)
        x2c = self._critic_input(tape, s2, ctx)
        q1t = self._critic(tape, nets.consts(tape, self.target1), self.target1, x2c, a2)
        q2t = self._critic(tape, nets.consts(tape, self.target2), self.target2, x2c, a2)
        qt = np.minimum(q1t.value[:, 0], q2t.value[:, 0])
        y = r + gamma * (1.0 - done) * (qt - self.alpha * lp2.value[:, 0])

        # critic step: mean squared TD error over both critics
        detached_ctx = ctx if ctx is None else np.asarray(ctx)
        xc = self._critic_input(tape, s, detached_ctx)
        av = tape.const(a)
        c1v = nets.leaves(tape, self.critic1)
        c2v = nets.leaves(tape, self.critic2)
        yv = tape.const(y[:, None])
        td1 = tape.sub(self._critic(tape, c1v, self.critic1, xc, av), yv)
        td2 = tape.sub(self._critic(tape, c2v, self.critic2, xc, av), yv)
        critic_loss = tape.mul(
            tape.add(tape.mean(tape.square(td1)), tape.mean(tape.square(td2))), 0.5
        )
        if not np.isfinite(critic_loss.value):
            raise FloatingPointError(
                f"non-finite critic loss {critic_loss.value} (y range "
                f"[{y.min()}, {y.max()}])"
            )
        cgrads = tape.backward(critic_loss)
        adam_step(
            self.critic1.params,
            {k: tape.grad(cgrads, v) for k, v in c1v.items()},
            self.opt_critic1,
        )
        adam_step(
            self.critic2.params,
            {k: tape.grad(cgrads, v) for k, v in c2v.items()},
            self.opt_critic2,
        )

        # actor step: E[alpha log pi - min Q]; fresh action sample, live
        # context only in the actor's own composition
        eps = rng.standard_normal((b, self.action_dim))
        avars = nets.leaves(tape, self.actor)
        x_pi = self._compose(tape, s, live_ctx if live_ctx is not None else ctx)
        a_new, lp = self._policy(tape, avars, x_pi, eps)
        q1pi = self._critic(tape, nets.consts(tape, self.critic1), self.critic1, xc, a_new)
        q2pi = self._critic(tape, nets.consts(tape, self.critic2), self.critic2, xc, a_new)
        qmin = tape.minimum(q1pi, q2pi)
        actor_loss = tape.mean(
            tape.sub(tape.mul(lp, self.alpha), tape.slice_cols(qmin, 0, 1))
        )
        if not np.isfinite(actor_loss.value):
            raise FloatingPointError(f"non-finite actor loss {actor_loss.value}")
        agrads = tape.backward(actor_loss)
        adam_step(
            self.actor.params,
            {k: tape.grad(agrads, v) for k, v in avars.items()},
            self.opt_actor,
        )

        # temperature step on the detached log-density
        la = tape.leaf(self.log_alpha["log_alpha"])
        alpha_loss = tape.neg(
            tape.mean(tape.mul(la, tape.const(lp.value + self.target_entropy)))
        )
        tgrads = tape.backward(alpha_loss)
        adam_step(
            self.log_alpha, {"log_alpha": tape.grad(tgrads, la)}, self.opt_alpha
        )

        losses = SACLosses(
            critic=float(critic_loss.value),
            actor=float(actor_loss.value),
            alpha_loss=float(alpha_loss.value),
            alpha=self.alpha,
            actor_grads=agrads,
            tape=tape,
        )
        if not (
            np.isfinite(losses.critic)
            and np.isfinite(losses.actor)
            and np.isfinite(losses.alpha_loss)
        ):
            raise FloatingPointError(f"non-finite SAC losses: {losses}")
        return losses

    def soft_update(self, tau: Optional[float] = None) -> None:
        """Polyak step: target <- tau * online + (1 - tau) * target."""
        tau = self.cfg.tau if tau is None else tau
        if not 0.0 <= tau <= 1.0:
            raise ConfigError(f"tau must be in [0, 1], got {tau}")
        for online, target in (
            (self.critic1, self.target1),
            (self.critic2, self.target2),
        ):
            for k, p in online.params.items():
                t = target.params[k]
                t *= 1.0 - tau
                t += tau * p

    # -- checkpoint plumbing ---------------------------------------------------

    def param_groups(self) -> dict[str, dict[str, np.ndarray]]:
        return {
            "actor": self.actor.params,
            "critic1": self.critic1.params,
            "critic2": self.critic2.params,
            "target1": self.target1.params,
            "target2": self.target2.params,
            "temperature": self.log_alpha,
        }

    def opt_states(self) -> dict[str, AdamState]:
        return {
            "actor": self.opt_actor,
            "critic1": self.opt_critic1,
            "critic2": self.opt_critic2,
            "temperature": self.opt_alpha,
        }
