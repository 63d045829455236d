"""Shaping terms for approach, symmetry, hover, tactile grasp and pose-lift.

Each term exists twice: a kernel over plain numbers (``*_reward``) and a
state-level wrapper (``r_*``) that extracts the distances from a
:class:`~snngrasp.env.WorldState`. Everything broadcasts over the batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import TactileFeatures, WorldState


@dataclass(frozen=True)
class RewardParams:
    alpha: tuple = (0.5, 0.5, 0.3, 0.5, 1.0)  # alpha_1..alpha_5
    alpha8: float = 0.5
    alpha9: float = 2.0
    lam: tuple = (5.0, 5.0, 8.0, 10.0, 10.0, 50.0, 1.0)  # lambda_1..lambda_7
    gamma1: float = 2.0
    gamma2: float = 5.0
    delta1: float = 0.03
    delta2: float = 0.05
    delta3: float = 0.02
    epsilon: float = 0.01
    h1: float = 0.10
    h2: float = 0.20
    f_tol: float = 0.5
    time_penalty: float = 0.001

    def __post_init__(self):
        if len(self.alpha) != 5:
            raise ValueError("reward.alpha needs 5 entries (alpha_1..alpha_5)")
        if len(self.lam) != 7:
            raise ValueError("reward.lam needs 7 entries (lambda_1..lambda_7)")
        if any(v <= 0 for v in self.lam):
            raise ValueError("reward.lam entries must be positive")
        if min(self.delta1, self.delta2, self.delta3, self.epsilon, self.h1, self.h2) < 0:
            raise ValueError("reward deltas, epsilon and lift thresholds must be non-negative")
        if not self.h1 < self.h2:
            raise ValueError("reward.h1 must be below reward.h2")
        if self.f_tol < 0:
            raise ValueError("reward.f_tol must be non-negative")


def geo_reward(d1, d2, d3, p: RewardParams):
    a, lam = p.alpha, p.lam
    return (
        a[0] * (1 - np.tanh(lam[0] * d1))
        + a[1] * (1 - np.tanh(lam[1] * d2))
        + a[2] * (1 - np.tanh(lam[2] * d3))
    )


def sym_reward(finger_dy, mid_dy, p: RewardParams):
    """``finger_dy = |y_lf - y_rf|``, ``mid_dy = |y_mid - y_obj|``."""
    return p.alpha[3] * (1 - np.tanh(p.lam[3] * np.abs(finger_dy))) + p.gamma1 * np.maximum(
        0.0, p.delta1 - np.abs(mid_dy)
    )


def hover_reward(mid_dy, p: RewardParams):
    return -np.exp(p.lam[4] * (np.abs(mid_dy) - p.delta2))


def tg_reward(gap, s_obj, norm_lf, norm_rf, dot_lf, dot_rf, contact_lf, contact_rf, p: RewardParams):
    """``dot_*`` is the force projected on the unit fingertip-to-cube direction (N)."""
    fit = p.alpha[4] * np.exp(-p.lam[5] * np.abs(gap - (s_obj + p.epsilon)))
    balance = 1 - np.tanh(p.lam[6] * np.abs(norm_lf - norm_rf))
    return fit + 0.5 * (balance + (dot_lf + dot_rf) + (contact_lf + contact_rf))


def pl_reward(upright, h, p: RewardParams):
    """``upright = y_eef . (-y)``."""
    return p.alpha8 * upright + p.alpha9 * np.minimum(p.gamma2 * (h + p.delta3), p.gamma2)


def distances(state: WorldState):
    """``(d1, d2, d3)``: mean tip/center distance, center distance, X-Z distance."""
    d = np.linalg.norm(state.p_mid - state.p_obj, axis=-1)
    d_lf = np.linalg.norm(state.p_lf - state.p_obj, axis=-1)
    d_rf = np.linalg.norm(state.p_rf - state.p_obj, axis=-1)
    d3 = np.linalg.norm((state.p_mid - state.p_obj)[:, [0, 2]], axis=-1)
    return (d + d_lf + d_rf) / 3.0, d, d3


def mid_offset(state: WorldState):
    return np.abs(state.p_mid[:, 1] - state.p_obj[:, 1])


def r_geo(state: WorldState, p: RewardParams):
    return geo_reward(*distances(state), p)


def r_sym(state: WorldState, p: RewardParams):
    return sym_reward(np.abs(state.p_lf[:, 1] - state.p_rf[:, 1]), mid_offset(state), p)


def r_hover(state: WorldState, p: RewardParams):
    return hover_reward(mid_offset(state), p)


def r_tg(state: WorldState, tactile: TactileFeatures, p: RewardParams):
    # f . unit(c - p) == |f| cos(theta)
    return tg_reward(
        state.gap_eef,
        state.s_obj,
        tactile.norm_lf,
        tactile.norm_rf,
        tactile.norm_lf * tactile.cos_lf,
        tactile.norm_rf * tactile.cos_rf,
        tactile.contact_lf,
        tactile.contact_rf,
        p,
    )


def r_pl(state: WorldState, p: RewardParams):
    return pl_reward(-state.y_eef[:, 1], state.h, p)


TERMS = ("r_geo", "r_sym", "r_hover", "r_tg", "r_pl")


def all_terms(state: WorldState, tactile: TactileFeatures, p: RewardParams) -> dict:
    return {
        "r_geo": r_geo(state, p),
        "r_sym": r_sym(state, p),
        "r_hover": r_hover(state, p),
        "r_tg": r_tg(state, tactile, p),
        "r_pl": r_pl(state, p),
    }
