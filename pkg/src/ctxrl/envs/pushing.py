"""Quasi-static planar pushing: a disc tool pushes a rectangular box to a goal.

The tool tracks a commanded target over several physics substeps.  Disc to
rectangle contact produces a force along the contact normal with the
tangential component capped by the tool friction coefficient (stick/slide);
the box's rigid displacement follows the flow rule of an ellipsoidal limit
surface scaled by the support friction, f_max = mu_table * m * g0 and
tau_max = kappa * f_max, with torque taken about the (possibly offset) center
of mass.  Per substep the box moves by the minimal limit-surface-consistent
displacement that resolves the penetration; a finite pushing-force budget
makes heavy or high-friction boxes yield less.
"""

from __future__ import annotations

import numpy as np

from ..spaces import ConfigError, ContextSpace, ContextVector
from . import EnvFault, StepResult

G0 = 9.81

BOX_W = 0.17  # long side, box-frame x
BOX_H = 0.105
PUSHER_RADIUS = 0.015
KAPPA = float(np.sqrt((BOX_W**2 + BOX_H**2) / 12.0))

PHYSICS_DT = 0.005
DURATION_CHOICES = 5  # durations 0.04 + 0.005*i, i = 0..4 -> 8..12 substeps
BASE_SUBSTEPS = 8

ACTION_CAP = 0.01
POS_NOISE_STD = 0.003
ANGLE_NOISE_STD = 0.05
SUCCESS_DIST = 0.03

_BOUNDS = {
    "mass": (0.1, 1.0),
    "friction_tool": (0.1, 0.5),
    "friction_table": (0.2, 0.8),
    "com_offset": (-0.04, 0.04),
}


def pushing_space(with_com: bool = False) -> ContextSpace:
    names = ["mass", "friction_tool", "friction_table"]
    if with_com:
        names.append("com_offset")
    return ContextSpace(tuple((n, *_BOUNDS[n]) for n in names))


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    w = ((theta + np.pi) % (2.0 * np.pi)) - np.pi
    return np.pi if w == -np.pi else w


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _perp(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


def _cross2(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def rect_closest(p_local: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Signed distance, closest boundary point, and outward normal.

    All in the box frame; signed distance is negative inside the rectangle.
    """
    hx, hy = BOX_W / 2.0, BOX_H / 2.0
    dx, dy = abs(p_local[0]) - hx, abs(p_local[1]) - hy
    if dx > 0.0 or dy > 0.0:
        cp = np.array([np.clip(p_local[0], -hx, hx), np.clip(p_local[1], -hy, hy)])
        diff = p_local - cp
        dist = float(np.hypot(diff[0], diff[1]))
        if dist >= 1e-12:
            return dist, cp, diff / dist
    # inside (or on the boundary): closest face is the least-penetrated axis
    sx = 1.0 if p_local[0] >= 0.0 else -1.0
    sy = 1.0 if p_local[1] >= 0.0 else -1.0
    if dx >= dy:
        return float(dx), np.array([sx * hx, p_local[1]]), np.array([sx, 0.0])
    return float(dy), np.array([p_local[0], sy * hy]), np.array([0.0, sy])


def resolve_contact(
    pose: np.ndarray,
    pusher: np.ndarray,
    drag_t: float,
    context: dict[str, float],
    max_push_force: float,
    disp_cap: float = np.inf,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Resolve one disc-rectangle penetration quasi-statically.

    `pose` is (x, y, theta) of the box, `pusher` the disc center, `drag_t`
    the tangential pusher displacement to transmit when the contact sticks,
    `disp_cap` the remaining pusher displacement budget this substep (the box
    center of mass never moves farther than the pusher did).
    Returns (new_pose, new_pusher, moved).
    """
    center = pose[:2]
    R = _rot(pose[2])
    p_local = R.T @ (pusher - center)
    sd, cp_local, n_out_local = rect_closest(p_local)
    phi = PUSHER_RADIUS - sd
    if phi <= 1e-12:
        return pose, pusher, False

    n = -(R @ n_out_local)  # push direction: from pusher into the box
    t = _perp(n)
    contact = center + R @ cp_local
    com = center + R @ np.array([context.get("com_offset", 0.0), 0.0])
    r_c = contact - com
    pr = _perp(r_c)
    M = np.eye(2) + np.outer(pr, pr) / KAPPA**2

    mu = context["friction_tool"]
    F = np.linalg.solve(M, phi * n + drag_t * t)
    fn, ft = float(F @ n), float(F @ t)
    if fn <= 0.0:
        # the pusher is not pressing into the box: displace the pusher instead
        return pose, pusher - n * phi, False
    if abs(ft) > mu * fn + 1e-15:
        # sliding: force on the cone edge that opposes the relative slip;
        # on ambiguity take the smaller limit-surface-consistent displacement
        lead = 1.0 if ft >= 0.0 else -1.0
        best = None
        for sigma in (lead, -lead):
            f_hat = (n + sigma * mu * t) / np.sqrt(1.0 + mu * mu)
            denom = float((M @ f_hat) @ n)
            if denom <= 1e-12:
                continue
            s = phi / denom
            slip = drag_t - s * float((M @ f_hat) @ t)
            consistent = slip == 0.0 or np.sign(slip) == sigma
            rho = np.hypot(1.0, _cross2(r_c, f_hat) / KAPPA)
            key = (0 if consistent else 1, s * rho)
            if best is None or key < best[0]:
                best = (key, s * f_hat)
        if best is None:
            return pose, pusher - n * phi, False
        F = best[1]

    f_dir = F / np.linalg.norm(F)
    rho = float(np.hypot(1.0, _cross2(r_c, f_dir) / KAPPA))
    f_max = context["friction_table"] * context["mass"] * G0
    f_req = f_max / rho
    alpha = min(1.0, max_push_force / f_req)

    v = alpha * F
    omega = alpha * _cross2(r_c, F) / KAPPA**2
    com_disp = float(np.hypot(v[0], v[1]))
    if com_disp > disp_cap:  # quasi-static bound: never outrun the pusher
        scale = disp_cap / com_disp
        v, omega, alpha = v * scale, omega * scale, alpha * scale

    new_center = com + _rot(omega) @ (center - com) + v
    new_theta = wrap_angle(pose[2] + omega)
    new_pusher = pusher - n * ((1.0 - alpha) * phi)
    return np.array([new_center[0], new_center[1], new_theta]), new_pusher, True


class PushingEnv:
    """Planar pushing episode; terminates on success, fails on an
    out-of-workspace command, truncates at `max_steps`."""

    obs_dim = 7
    action_dim = 2
    action_bound = ACTION_CAP

    def __init__(
        self,
        max_steps: int = 250,
        goal: tuple[float, float] = (0.50, 0.015),
        reward_scale: float = 0.10,
        fail_penalty: float = -50.0,
        workspace: tuple[float, float, float, float] = (0.2, 0.8, -0.2, 0.5),
        max_push_force: float = 2.5,
    ):
        self.max_steps = max_steps
        self.goal = np.asarray(goal, dtype=np.float64)
        self.reward_scale = reward_scale
        self.fail_penalty = fail_penalty
        self.workspace = workspace
        self.max_push_force = max_push_force
        self._rng: np.random.Generator | None = None
        self._ctx: dict[str, float] = {}
        self._pose = np.zeros(3)
        self._pusher = np.zeros(2)
        self._target = np.zeros(2)
        self._prev_action = np.zeros(2)
        self._steps = 0

    # -- helpers ------------------------------------------------------------

    def _in_workspace(self, p: np.ndarray) -> bool:
        x0, x1, y0, y1 = self.workspace
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    def _goal_distance(self) -> float:
        return float(np.linalg.norm(self._pose[:2] - self.goal))

    def _reward(self, failed: bool) -> float:
        r = -np.log1p(self._goal_distance() / self.reward_scale)
        if failed:
            r += self.fail_penalty
        return float(r)

    def _observation(self, noisy: bool = True) -> np.ndarray:
        pose = self._pose.copy()
        if noisy:
            pose[0] += self._rng.normal(0.0, POS_NOISE_STD)
            pose[1] += self._rng.normal(0.0, POS_NOISE_STD)
            pose[2] = wrap_angle(pose[2] + self._rng.normal(0.0, ANGLE_NOISE_STD))
        return np.array(
            [
                self._pusher[0],
                self._pusher[1],
                pose[0],
                pose[1],
                pose[2],
                self._prev_action[0],
                self._prev_action[1],
            ]
        )

    def _separation(self, pusher: np.ndarray, pose: np.ndarray) -> float:
        R = _rot(pose[2])
        sd, _, _ = rect_closest(R.T @ (pusher - pose[:2]))
        return sd - PUSHER_RADIUS

    @property
    def true_pose(self) -> np.ndarray:
        return self._pose.copy()

    # -- env api -------------------------------------------------------------

    def reset(self, context: ContextVector, rng: np.random.Generator) -> np.ndarray:
        ctx = {"com_offset": 0.0}
        ctx.update(context.as_dict())
        for name, val in ctx.items():
            lo, hi = _BOUNDS[name]
            if not lo <= val <= hi:
                raise ConfigError(f"pushing context {name}={val} outside [{lo}, {hi}]")
        self._ctx = ctx
        self._rng = rng
        while True:  # reject starting poses that touch the tool
            ee = np.array([rng.uniform(0.45, 0.55), rng.uniform(0.25, 0.35)])
            box = ee + np.array(
                [rng.uniform(-0.03, 0.03), rng.uniform(-0.1025, -0.0675)]
            )
            pose = np.array([box[0], box[1], rng.uniform(-0.5236, 0.5236)])
            if self._separation(ee, pose) > 1e-9:
                break
        self._pose = pose
        self._pusher = ee
        self._target = ee.copy()
        self._prev_action = np.zeros(2)
        self._steps = 0
        return self._observation()

    def step(self, action: np.ndarray) -> StepResult:
        if not np.all(np.isfinite(self._pose)):
            raise EnvFault(f"pushing pose non-finite: {self._pose}")
        a = np.clip(
            np.asarray(action, dtype=np.float64).reshape(2), -ACTION_CAP, ACTION_CAP
        )
        self._steps += 1
        new_target = self._target + a
        if not self._in_workspace(new_target):
            self._prev_action = a
            return StepResult(
                observation=self._observation(),
                reward=self._reward(failed=True),
                failed=True,
            )
        self._target = new_target
        k = BASE_SUBSTEPS + int(self._rng.integers(0, DURATION_CHOICES))
        # constant-velocity plan toward the target; when the force budget
        # stalls the tool, the shortfall persists until the next command
        delta = (self._target - self._pusher) / k
        for j in range(k):
            in_contact = self._separation(self._pusher, self._pose) <= 1e-9
            self._pusher = self._pusher + delta
            budget = float(np.hypot(delta[0], delta[1]))
            # transmit tangential drag only through a pre-existing contact
            for _ in range(8):
                drag = 0.0
                if in_contact:
                    R = _rot(self._pose[2])
                    _, _, n_out = rect_closest(R.T @ (self._pusher - self._pose[:2]))
                    drag = float(delta @ _perp(-(R @ n_out)))
                pose0 = self._pose
                self._pose, self._pusher, moved = resolve_contact(
                    self._pose, self._pusher, drag, self._ctx,
                    self.max_push_force, disp_cap=budget,
                )
                in_contact = False  # drag applies once per substep
                if not moved:
                    break
                budget = max(0.0, budget - float(
                    np.hypot(self._pose[0] - pose0[0], self._pose[1] - pose0[1])
                ))
        if not np.all(np.isfinite(self._pose)):
            raise EnvFault(f"pushing pose non-finite after contact: {self._pose}")
        self._prev_action = a
        success = self._goal_distance() <= SUCCESS_DIST
        return StepResult(
            observation=self._observation(),
            reward=self._reward(failed=False),
            terminated=success,
            truncated=(not success) and self._steps >= self.max_steps,
        )
