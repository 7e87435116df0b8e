"""SE(3) pose algebra and the head/world/body virtual-monitor anchoring modes.

Transform convention
--------------------
``G_AB`` maps coordinates expressed in frame A to frame B, and products are
applied right-to-left: ``x_O = G_HO * G_WH * x_W``. So ``compose(A, B)``
returns ``A * B``, the transform that applies B first and A second. World,
HMD, and virtual-object frames are related by

    G_WO = G_HO * G_WH          (world -> object)
    G_HO = G_WO * inverse(G_WH)

which is what the world-anchored mode evaluates every frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

QUAT_UNIT_TOL = 1e-6


class AnchorModeError(ValueError):
    """Anchoring operation called for the wrong configured mode."""


def _normalize_quat(q):
    w, x, y, z = q
    norm = math.sqrt(w * w + x * x + y * y + z * z)
    if norm == 0.0:
        raise ValueError("zero quaternion")
    return (w / norm, x / norm, y / norm, z / norm)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: unit quaternion (w, x, y, z) plus translation in meters."""

    q: tuple  # (w, x, y, z)
    t: tuple  # (x, y, z)

    def __post_init__(self):
        if len(self.q) != 4 or len(self.t) != 3:
            raise ValueError("pose needs a 4-quaternion and a 3-translation")
        w, x, y, z = self.q
        norm = math.sqrt(w * w + x * x + y * y + z * z)
        if abs(norm - 1.0) > QUAT_UNIT_TOL:
            raise ValueError(f"quaternion norm {norm} deviates from 1 beyond {QUAT_UNIT_TOL}")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(q=(1.0, 0.0, 0.0, 0.0), t=(0.0, 0.0, 0.0))

    @classmethod
    def from_axis_angle(cls, axis, angle_rad, translation=(0.0, 0.0, 0.0)) -> "Pose":
        ax, ay, az = axis
        norm = math.sqrt(ax * ax + ay * ay + az * az)
        if norm == 0.0:
            raise ValueError("zero rotation axis")
        half = 0.5 * angle_rad
        s = math.sin(half) / norm
        q = (math.cos(half), ax * s, ay * s, az * s)
        return cls(q=_normalize_quat(q), t=tuple(float(v) for v in translation))

    @classmethod
    def from_translation(cls, translation) -> "Pose":
        return cls(q=(1.0, 0.0, 0.0, 0.0), t=tuple(float(v) for v in translation))

    def rotate_vector(self, v):
        """Apply the rotation part to a 3-vector."""
        w, x, y, z = self.q
        vx, vy, vz = v
        # q * (0, v) * q^-1 expanded; standard quaternion sandwich
        tx = 2.0 * (y * vz - z * vy)
        ty = 2.0 * (z * vx - x * vz)
        tz = 2.0 * (x * vy - y * vx)
        return (
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        )

    def apply(self, point):
        """Map a point expressed in frame A to frame B (for G_AB)."""
        rx, ry, rz = self.rotate_vector(point)
        return (rx + self.t[0], ry + self.t[1], rz + self.t[2])

    def to_dict(self) -> dict:
        return {"q": list(self.q), "t": list(self.t)}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(q=tuple(float(v) for v in d["q"]), t=tuple(float(v) for v in d["t"]))


def _quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def compose(a: Pose, b: Pose) -> Pose:
    """Return a * b: the transform applying b first, then a.

    With G_AB mapping A-coordinates to B-coordinates this means
    compose(G_HO, G_WH) = G_WO. The result quaternion is renormalized.
    """
    q = _normalize_quat(_quat_mul(a.q, b.q))
    rbx, rby, rbz = a.rotate_vector(b.t)
    t = (rbx + a.t[0], rby + a.t[1], rbz + a.t[2])
    return Pose(q=q, t=t)


def inverse(p: Pose) -> Pose:
    """Rigid-transform inverse: (R, t)^-1 = (R^T, -R^T t)."""
    w, x, y, z = p.q
    conj = Pose(q=_normalize_quat((w, -x, -y, -z)), t=(0.0, 0.0, 0.0))
    rx, ry, rz = conj.rotate_vector(p.t)
    return Pose(q=conj.q, t=(-rx, -ry, -rz))


def rotation_angle(p: Pose) -> float:
    """Rotation magnitude of the pose in radians, in [0, pi]."""
    w = min(1.0, max(-1.0, abs(p.q[0])))
    return 2.0 * math.acos(w)


def pose_deviation(a: Pose, b: Pose) -> tuple:
    """(positional distance in meters, angular distance in radians) between poses."""
    dx = a.t[0] - b.t[0]
    dy = a.t[1] - b.t[1]
    dz = a.t[2] - b.t[2]
    d = math.sqrt(dx * dx + dy * dy + dz * dz)
    dot = a.q[0] * b.q[0] + a.q[1] * b.q[1] + a.q[2] * b.q[2] + a.q[3] * b.q[3]
    dot = min(1.0, max(-1.0, abs(dot)))
    theta = 2.0 * math.acos(dot)
    return d, theta


def _slerp(qa, qb, alpha):
    dot = qa[0] * qb[0] + qa[1] * qb[1] + qa[2] * qb[2] + qa[3] * qb[3]
    if dot < 0.0:  # shortest arc
        qb = (-qb[0], -qb[1], -qb[2], -qb[3])
        dot = -dot
    if dot > 0.9995:
        # nearly parallel: lerp then renormalize
        q = tuple(qa[i] + alpha * (qb[i] - qa[i]) for i in range(4))
        return _normalize_quat(q)
    theta0 = math.acos(min(1.0, dot))
    sin0 = math.sin(theta0)
    sa = math.sin((1.0 - alpha) * theta0) / sin0
    sb = math.sin(alpha * theta0) / sin0
    return _normalize_quat(tuple(sa * qa[i] + sb * qb[i] for i in range(4)))


def interpolate(a: Pose, b: Pose, alpha: float) -> Pose:
    """Blend from a toward b: translation linear, rotation spherical-linear."""
    q = _slerp(a.q, b.q, alpha)
    t = tuple(a.t[i] + alpha * (b.t[i] - a.t[i]) for i in range(3))
    return Pose(q=q, t=t)


# Body-mode defaults: deadband 0.10 m / 10 degrees, pursuit time constant 0.5 s.
DEFAULT_D_DEAD = 0.10
DEFAULT_THETA_DEAD = math.radians(10.0)
DEFAULT_TAU = 0.5


@dataclass
class AnchorState:
    """Mode plus the stored constants the three anchoring laws need.

    head:  G_HO is pinned to fixed_G_HO.
    world: G_WO is pinned to fixed_G_WO.
    body:  current_G_WO holds like world mode while the rendered monitor
           stays within (d_dead, theta_dead) of fixed_G_HO, and pursues the
           head exponentially (time constant tau) once it drifts outside.
    """

    mode: str = "world"
    fixed_G_HO: Pose = field(default_factory=Pose.identity)
    fixed_G_WO: Pose = field(default_factory=Pose.identity)
    d_dead: float = DEFAULT_D_DEAD
    theta_dead: float = DEFAULT_THETA_DEAD
    tau: float = DEFAULT_TAU
    current_G_WO: Pose | None = None

    def __post_init__(self):
        if self.mode not in ("head", "world", "body"):
            raise ValueError(f"unknown anchor mode {self.mode!r}")
        if self.d_dead <= 0 or self.theta_dead <= 0 or self.tau <= 0:
            raise ValueError("body-mode parameters must be positive")
        if self.current_G_WO is None:
            self.current_G_WO = self.fixed_G_WO

    def align_body(self, g_wh: Pose) -> "AnchorState":
        """Seed body mode from the current head pose so it starts deviation-free."""
        self.current_G_WO = compose(self.fixed_G_HO, g_wh)
        return self


def head_anchored_pose(state: AnchorState, g_wh: Pose) -> Pose:
    """Head mode: G_HO stays at the configured constant, whatever the head does."""
    if state.mode != "head":
        raise AnchorModeError(f"head_anchored_pose called in mode {state.mode!r}")
    del g_wh
    return state.fixed_G_HO


def world_anchored_pose(state: AnchorState, g_wh: Pose) -> Pose:
    """World mode: solve G_HO so that compose(G_HO, G_WH) = fixed_G_WO.

    That is G_HO = G_WO * G_WH^-1; the rendered monitor is static in world
    space for any head trajectory.
    """
    if state.mode != "world":
        raise AnchorModeError(f"world_anchored_pose called in mode {state.mode!r}")
    return compose(state.fixed_G_WO, inverse(g_wh))


def _g_ho_from_g_wo(g_wo: Pose, g_wh: Pose) -> Pose:
    return compose(g_wo, inverse(g_wh))


def body_anchored_step(state: AnchorState, g_wh: Pose, dt: float) -> tuple:
    """Body mode: deadband hold plus exponential pursuit.

    The candidate G_HO is derived from the stored current_G_WO exactly as in
    world mode. While it deviates from fixed_G_HO by no more than
    (d_dead, theta_dead) the stored world pose is held. Outside the deadband,
    current_G_WO moves toward the world pose implied by fixed_G_HO with
    factor alpha = 1 - exp(-dt / tau) per step.

    Returns (G_HO, state); the state is mutated in place and also returned.
    """
    if state.mode != "body":
        raise AnchorModeError(f"body_anchored_step called in mode {state.mode!r}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    candidate = _g_ho_from_g_wo(state.current_G_WO, g_wh)
    d, theta = pose_deviation(candidate, state.fixed_G_HO)
    if d <= state.d_dead and theta <= state.theta_dead:
        return candidate, state
    target_g_wo = compose(state.fixed_G_HO, g_wh)
    alpha = 1.0 - math.exp(-dt / state.tau)
    state.current_G_WO = interpolate(state.current_G_WO, target_g_wo, alpha)
    return _g_ho_from_g_wo(state.current_G_WO, g_wh), state


def anchored_pose(state: AnchorState, g_wh: Pose, dt: float = 1.0 / 60.0) -> Pose:
    """Dispatch to the law for the configured mode (body mode advances state)."""
    if state.mode == "head":
        return head_anchored_pose(state, g_wh)
    if state.mode == "world":
        return world_anchored_pose(state, g_wh)
    pose, _ = body_anchored_step(state, g_wh, dt)
    return pose


def simulate_head_trajectory(kind: str, t: float, params: dict | None = None) -> Pose:
    """Deterministic stand-in for the HMD's tracking module.

    static: identity for all t.
    sinusoidal-sway: small sinusoidal translation plus yaw; params
      amplitude_m (default 0.05), amplitude_rad (default 0.1),
      period_s (default 4.0).
    step-turn: identity until t_step (default 1.0), then an instantaneous
      yaw of angle_rad (default 45 degrees).
    """
    p = params or {}
    if kind == "static":
        return Pose.identity()
    if kind == "sinusoidal-sway":
        amp_m = p.get("amplitude_m", 0.05)
        amp_rad = p.get("amplitude_rad", 0.1)
        period = p.get("period_s", 4.0)
        phase = 2.0 * math.pi * t / period
        sway = math.sin(phase)
        if amp_m == 0.0 and amp_rad == 0.0:
            return Pose.identity()
        return Pose.from_axis_angle((0.0, 1.0, 0.0), amp_rad * sway, translation=(amp_m * sway, 0.0, 0.0))
    if kind == "step-turn":
        t_step = p.get("t_step", 1.0)
        angle = p.get("angle_rad", math.radians(45.0))
        if t < t_step:
            return Pose.identity()
        return Pose.from_axis_angle((0.0, 1.0, 0.0), angle)
    raise ValueError(f"unknown trajectory kind {kind!r}")
