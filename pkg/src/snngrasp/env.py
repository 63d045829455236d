"""Vectorized two-finger gripper / free-floating cube simulator.

World frame: +Y is the lift ("up") axis, so approach alignment lives in the
X-Z plane. The end effector is kinematic (velocity commands tracked exactly,
clamped to the workspace box). Each fingertip is a sphere; contact with the
yaw-rotated cube is a penalty spring-damper. The cube floats: no gravity,
only contact forces, contact torque about Y and linear drag.

All state arrays carry a leading batch axis so one call steps many
environments at once.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .snn import NumericalDivergenceError

OBS_DIM = 29
GEOMETRIC = slice(0, 19)
TACTILE = slice(19, 26)
SEMANTIC = slice(26, 29)
MODES = ("multimodal", "unimodal")

_MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """SplitMix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def env_seed(master: int, index: int) -> int:
    """Seed of environment ``index`` under master seed ``master``."""
    return mix64((int(master) + int(index)) & _MASK64)


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 1.0 / 60.0
    substeps: int = 8
    episode_length: int = 300
    workspace_lo: tuple = (-0.3, -0.2, -0.3)
    workspace_hi: tuple = (0.3, 0.4, 0.3)
    home: tuple = (0.0, 0.0, -0.2)
    spawn_lo: tuple = (-0.1, -0.1, 0.05)
    spawn_hi: tuple = (0.1, 0.1, 0.25)
    size_lo: float = 0.04
    size_hi: float = 0.08
    yaw_range: float = 0.15
    density: float = 1000.0
    finger_radius: float = 0.006
    gap_init: float = 0.12
    gap_max: float = 0.15
    contact_stiffness: float = 1000.0
    contact_damping: float = 10.0
    drag: float = 0.1
    max_speed: float = 0.25
    max_rot_rate: float = 1.0
    max_gap_rate: float = 0.1
    escape_margin: float = 0.1
    stagger_start: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("env.dt must be positive")
        if self.substeps < 1:
            raise ValueError("env.substeps must be >= 1")
        if self.episode_length < 1:
            raise ValueError("env.episode_length must be >= 1")
        for lo, hi, name in (
            (self.spawn_lo, self.spawn_hi, "spawn"),
            (self.workspace_lo, self.workspace_hi, "workspace"),
        ):
            if len(lo) != 3 or len(hi) != 3:
                raise ValueError(f"env.{name} box corners need 3 coordinates")
            if any(a > b for a, b in zip(lo, hi)):
                raise ValueError(f"env.{name} box is degenerate (min > max)")
        if not 0 < self.size_lo <= self.size_hi:
            raise ValueError("env.size_lo/size_hi must satisfy 0 < lo <= hi")
        if self.drag < 0 or self.contact_stiffness < 0 or self.contact_damping < 0:
            raise ValueError("env drag and contact gains must be non-negative")
        if self.density <= 0 or self.finger_radius <= 0:
            raise ValueError("env.density and env.finger_radius must be positive")

    @property
    def action_scale(self) -> np.ndarray:
        s, r, g = self.max_speed, self.max_rot_rate, self.max_gap_rate
        return np.array([s, s, s, r, r, g])


@dataclass
class WorldState:
    """Batched simulator state. Every field has leading axis ``n``.

    ``f_lf``/``f_rf`` are the forces each fingertip applies to the cube,
    averaged over the last control step.
    """

    p_mid: np.ndarray
    eef_yaw: np.ndarray
    eef_pitch: np.ndarray
    v_eef: np.ndarray
    gap_eef: np.ndarray
    p_obj: np.ndarray
    v_obj: np.ndarray
    q_obj: np.ndarray
    w_obj: np.ndarray
    f_lf: np.ndarray
    f_rf: np.ndarray
    s_obj: np.ndarray
    p_obj0: np.ndarray
    t: np.ndarray

    def __len__(self) -> int:
        return self.p_mid.shape[0]

    @property
    def finger_axis(self) -> np.ndarray:
        return finger_axis(self.eef_yaw, self.eef_pitch)

    @property
    def y_eef(self) -> np.ndarray:
        """End-effector Y axis; equals world -Y at the home pose."""
        cy, sy = np.cos(self.eef_yaw), np.sin(self.eef_yaw)
        cp, sp = np.cos(self.eef_pitch), np.sin(self.eef_pitch)
        return np.stack([sp * cy, -cp, -sp * sy], axis=-1)

    @property
    def p_lf(self) -> np.ndarray:
        return self.p_mid + 0.5 * self.gap_eef[:, None] * self.finger_axis

    @property
    def p_rf(self) -> np.ndarray:
        return self.p_mid - 0.5 * self.gap_eef[:, None] * self.finger_axis

    @property
    def contact_lf(self) -> np.ndarray:
        return np.linalg.norm(self.f_lf, axis=-1) > 0

    @property
    def contact_rf(self) -> np.ndarray:
        return np.linalg.norm(self.f_rf, axis=-1) > 0

    @property
    def h(self) -> np.ndarray:
        return self.p_obj[:, 1] - self.p_obj0[:, 1]

    def __getitem__(self, idx) -> "WorldState":
        idx = np.atleast_1d(np.arange(len(self))[idx])
        return WorldState(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def copy(self) -> "WorldState":
        return WorldState(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def equals(self, other: "WorldState") -> bool:
        return all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name)) for f in fields(self)
        )


def stack_states(states) -> WorldState:
    states = list(states)
    return WorldState(
        **{f.name: np.concatenate([getattr(s, f.name) for s in states]) for f in fields(WorldState)}
    )


def finger_axis(yaw, pitch) -> np.ndarray:
    """Unit vector from the right fingertip to the left one (world X at home)."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    return np.stack([cp * cy, sp, -cp * sy], axis=-1)


def object_mass(cfg: EnvConfig, s_obj) -> np.ndarray:
    return cfg.density * np.asarray(s_obj) ** 3


def reset(cfg: EnvConfig, rng) -> WorldState:
    """Fresh state(s). ``rng`` is a seed, a Generator, or a list of Generators (one per env)."""
    if isinstance(rng, (list, tuple)):
        return stack_states(reset(cfg, g) for g in rng)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    p_obj = rng.uniform(cfg.spawn_lo, cfg.spawn_hi)[None, :]
    s_obj = rng.uniform(cfg.size_lo, cfg.size_hi, size=1)
    q_obj = rng.uniform(-cfg.yaw_range, cfg.yaw_range, size=1)
    z3 = np.zeros((1, 3))
    return WorldState(
        p_mid=np.array([cfg.home], dtype=float),
        eef_yaw=np.zeros(1),
        eef_pitch=np.zeros(1),
        v_eef=z3.copy(),
        gap_eef=np.array([cfg.gap_init], dtype=float),
        p_obj=p_obj,
        v_obj=z3.copy(),
        q_obj=q_obj,
        w_obj=np.zeros(1),
        f_lf=z3.copy(),
        f_rf=z3.copy(),
        s_obj=s_obj,
        p_obj0=p_obj.copy(),
        t=np.zeros(1, dtype=np.int64),
    )


def _rot_y(v: np.ndarray, angle: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    return np.stack([c * x + s * z, y, -s * x + c * z], axis=-1)


def contact_force(cfg: EnvConfig, tip, v_tip, p_obj, v_obj, q_obj, w_obj, s_obj):
    """Penalty force each sphere tip applies to its cube and the lever arm.

    Returns ``(force, lever)``; ``force`` is zero where the tip does not
    penetrate. The normal part of the force never pulls (no adhesion); the
    damping term also acts tangentially, which is the only grip mechanism.
    """
    half = 0.5 * s_obj[:, None]
    local = _rot_y(tip - p_obj, -q_obj)
    closest = np.clip(local, -half, half)
    diff = local - closest
    dist = np.linalg.norm(diff, axis=-1)
    outside = dist > 1e-12

    n_local = np.zeros_like(local)
    n_local[outside] = -diff[outside] / dist[outside, None]
    depth = cfg.finger_radius - dist
    inside = ~outside
    if np.any(inside):
        face_gap = half[inside] - np.abs(local[inside])
        axis = np.argmin(face_gap, axis=-1)
        rows = np.arange(axis.size)
        sign = np.sign(local[inside][rows, axis])
        sign[sign == 0] = 1.0
        n_in = np.zeros((axis.size, 3))
        n_in[rows, axis] = -sign
        n_local[inside] = n_in
        depth[inside] = cfg.finger_radius + face_gap[rows, axis]
        closest[inside] = local[inside]

    active = depth > 0
    normal = _rot_y(n_local, q_obj)
    lever = _rot_y(closest, q_obj)
    v_point = v_obj + np.stack([w_obj * lever[:, 2], np.zeros_like(w_obj), -w_obj * lever[:, 0]], -1)
    v_rel = v_point - v_tip
    force = cfg.contact_stiffness * depth[:, None] * normal - cfg.contact_damping * v_rel
    fn = np.sum(force * normal, axis=-1)
    force = force - np.minimum(fn, 0.0)[:, None] * normal
    force[~active] = 0.0
    return force, lever


def step(cfg: EnvConfig, state: WorldState, action, dt: float | None = None) -> WorldState:
    """Advance every environment by one control step. Pure: ``state`` is not modified."""
    dt = cfg.dt if dt is None else dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    action = np.asarray(action, dtype=float)
    if action.ndim == 1:
        action = action[None, :]
    if action.shape != (len(state), 6):
        raise ValueError(f"action shape {action.shape} does not match batch of {len(state)}")
    if not np.all(np.isfinite(action)):
        raise NumericalDivergenceError("non-finite action")
    cmd = np.clip(action, -1.0, 1.0) * cfg.action_scale

    lo, hi = np.asarray(cfg.workspace_lo), np.asarray(cfg.workspace_hi)
    p0, yaw0, pitch0, gap0 = state.p_mid, state.eef_yaw, state.eef_pitch, state.gap_eef
    p1 = np.clip(p0 + cmd[:, :3] * dt, lo, hi)
    yaw1 = np.clip(yaw0 + cmd[:, 3] * dt, -np.pi, np.pi)
    pitch1 = np.clip(pitch0 + cmd[:, 4] * dt, -0.5 * np.pi, 0.5 * np.pi)
    gap1 = np.clip(gap0 + cmd[:, 5] * dt, 0.0, cfg.gap_max)

    mass = object_mass(cfg, state.s_obj)
    inertia = mass * state.s_obj**2 / 6.0
    p_obj, v_obj = state.p_obj.copy(), state.v_obj.copy()
    q_obj, w_obj = state.q_obj.copy(), state.w_obj.copy()
    f_lf = np.zeros_like(p_obj)
    f_rf = np.zeros_like(p_obj)

    n_sub = cfg.substeps
    h = dt / n_sub

    def tips(frac):
        p = p0 + frac * (p1 - p0)
        axis = finger_axis(yaw0 + frac * (yaw1 - yaw0), pitch0 + frac * (pitch1 - pitch0))
        half_gap = 0.5 * (gap0 + frac * (gap1 - gap0))[:, None]
        return p + half_gap * axis, p - half_gap * axis

    prev_l, prev_r = tips(0.0)
    for k in range(1, n_sub + 1):
        lf, rf = tips(k / n_sub)
        fl, arm_l = contact_force(cfg, lf, (lf - prev_l) / h, p_obj, v_obj, q_obj, w_obj, state.s_obj)
        fr, arm_r = contact_force(cfg, rf, (rf - prev_r) / h, p_obj, v_obj, q_obj, w_obj, state.s_obj)
        total = fl + fr
        torque = (arm_l[:, 2] * fl[:, 0] - arm_l[:, 0] * fl[:, 2]) + (
            arm_r[:, 2] * fr[:, 0] - arm_r[:, 0] * fr[:, 2]
        )
        v_obj = v_obj + (total / mass[:, None] - cfg.drag * v_obj) * h
        p_obj = p_obj + v_obj * h
        w_obj = w_obj + (torque / inertia - cfg.drag * w_obj) * h
        q_obj = q_obj + w_obj * h
        f_lf += fl
        f_rf += fr
        prev_l, prev_r = lf, rf

    new = WorldState(
        p_mid=p1,
        eef_yaw=yaw1,
        eef_pitch=pitch1,
        v_eef=(p1 - p0) / dt,
        gap_eef=gap1,
        p_obj=p_obj,
        v_obj=v_obj,
        q_obj=q_obj,
        w_obj=w_obj,
        f_lf=f_lf / n_sub,
        f_rf=f_rf / n_sub,
        s_obj=state.s_obj.copy(),
        p_obj0=state.p_obj0.copy(),
        t=state.t + 1,
    )
    if not np.all(np.isfinite(new.p_obj)) or not np.all(np.isfinite(new.v_obj)):
        raise NumericalDivergenceError("object state diverged")
    return new


def batch_step(cfg: EnvConfig, states, actions, dt: float | None = None) -> list[WorldState]:
    """Step a collection of single-env states independently."""
    states, actions = list(states), list(actions)
    if len(states) != len(actions):
        raise ValueError(f"{len(states)} states but {len(actions)} actions")
    if not states:
        return []
    out = step(cfg, stack_states(states), np.stack([np.asarray(a, float).reshape(6) for a in actions]), dt)
    return [out[i] for i in range(len(out))]


@dataclass
class TactileFeatures:
    norm_lf: np.ndarray
    norm_rf: np.ndarray
    symmetry_s: np.ndarray
    cos_lf: np.ndarray
    cos_rf: np.ndarray
    contact_lf: np.ndarray
    contact_rf: np.ndarray


ZERO_FORCE = 1e-9


def _alignment(force, tip, center):
    norm = np.linalg.norm(force, axis=-1)
    to_c = center - tip
    dist = np.linalg.norm(to_c, axis=-1)
    ok = (norm >= ZERO_FORCE) & (dist > 0)
    cos = np.zeros_like(norm)
    cos[ok] = np.sum(force[ok] * to_c[ok], axis=-1) / (norm[ok] * dist[ok])
    return norm, np.clip(cos, -1.0, 1.0)


def tactile_from_vectors(f_lf, f_rf, p_lf, p_rf, center) -> TactileFeatures:
    """Force norms, force symmetry and force/center alignment cosines."""
    f_lf, f_rf = np.atleast_2d(f_lf), np.atleast_2d(f_rf)
    p_lf, p_rf, center = np.atleast_2d(p_lf), np.atleast_2d(p_rf), np.atleast_2d(center)
    n_l, c_l = _alignment(f_lf, p_lf, center)
    n_r, c_r = _alignment(f_rf, p_rf, center)
    return TactileFeatures(
        norm_lf=n_l,
        norm_rf=n_r,
        symmetry_s=np.abs(n_l - n_r),
        cos_lf=c_l,
        cos_rf=c_r,
        contact_lf=(n_l > 0).astype(float),
        contact_rf=(n_r > 0).astype(float),
    )


def tactile_features(state: WorldState) -> TactileFeatures:
    return tactile_from_vectors(state.f_lf, state.f_rf, state.p_lf, state.p_rf, state.p_obj)


@dataclass(frozen=True)
class ObsScales:
    position: float = 0.3
    velocity: float = 0.5
    relative: float = 0.2
    force: float = 10.0
    size: float = 0.1
    height: float = 0.3


def observe(
    cfg: EnvConfig,
    state: WorldState,
    mode: str = "multimodal",
    stage: int = 0,
    scales: ObsScales = ObsScales(),
) -> np.ndarray:
    """29-slot observation, shape ``(n, 29)``, every entry in [-1, 1].

    Layout: p_mid, p_lf, p_rf, p_obj, v_obj, p_obj - p_mid, gap | norm_lf,
    norm_rf, symmetry, cos_lf, cos_rf, contact_lf, contact_rf | s_obj,
    stage/2, h. Unimodal mode zeroes the tactile and semantic blocks.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    n = len(state)
    center = 0.5 * (np.asarray(cfg.workspace_lo) + np.asarray(cfg.workspace_hi))
    obs = np.zeros((n, OBS_DIM))
    obs[:, 0:3] = (state.p_mid - center) / scales.position
    obs[:, 3:6] = (state.p_lf - center) / scales.position
    obs[:, 6:9] = (state.p_rf - center) / scales.position
    obs[:, 9:12] = (state.p_obj - center) / scales.position
    obs[:, 12:15] = state.v_obj / scales.velocity
    obs[:, 15:18] = (state.p_obj - state.p_mid) / scales.relative
    obs[:, 18] = state.gap_eef / cfg.gap_max
    if mode == "multimodal":
        tf = tactile_features(state)
        obs[:, 19] = tf.norm_lf / scales.force
        obs[:, 20] = tf.norm_rf / scales.force
        obs[:, 21] = tf.symmetry_s / scales.force
        obs[:, 22] = tf.cos_lf
        obs[:, 23] = tf.cos_rf
        obs[:, 24] = tf.contact_lf
        obs[:, 25] = tf.contact_rf
        obs[:, 26] = state.s_obj / scales.size
        obs[:, 27] = stage / 2.0
        obs[:, 28] = state.h / scales.height
    return np.clip(obs, -1.0, 1.0)


def escaped(cfg: EnvConfig, state: WorldState) -> np.ndarray:
    """True where the cube has drifted out of the workspace plus margin."""
    lo = np.asarray(cfg.workspace_lo) - cfg.escape_margin
    hi = np.asarray(cfg.workspace_hi) + cfg.escape_margin
    return np.any((state.p_obj < lo) | (state.p_obj > hi), axis=-1)


TRAJECTORY_COLUMNS = (
    "t", "p_mid_x", "p_mid_y", "p_mid_z", "p_obj_x", "p_obj_y", "p_obj_z",
    "gap_eef", "norm_lf", "norm_rf", "h",
)


def trajectory_row(state: WorldState, i: int = 0) -> list:
    tf = tactile_features(state[i])
    return [
        int(state.t[i]), *state.p_mid[i].tolist(), *state.p_obj[i].tolist(),
        float(state.gap_eef[i]), float(tf.norm_lf[0]), float(tf.norm_rf[0]), float(state.h[i]),
    ]
