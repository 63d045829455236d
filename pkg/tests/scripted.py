"""Hand-coded reach-close-lift controller used as an oracle for the simulator.

Proportional control on ``p_obj - p_mid`` (approach along the finger-normal
axis only once laterally centred), close to ``s_obj + epsilon`` minus a
small squeeze, then command the lift axis at full speed.
"""
import numpy as np

from snngrasp import env as sim


def controller(cfg: sim.EnvConfig, st: sim.WorldState, eps=0.01, squeeze=0.004, gain=8.0):
    n = len(st)
    act = np.zeros((n, 6))
    err = st.p_obj - st.p_mid
    tf = sim.tactile_features(st)
    target_gap = st.s_obj + eps - squeeze
    grasped = (tf.contact_lf > 0) & (tf.contact_rf > 0) & (st.gap_eef < st.s_obj + eps)
    lateral = (np.abs(err[:, 0]) < 0.008) & (np.abs(err[:, 1]) < 0.008)
    v = gain * err
    v[:, 2] = np.where(lateral, v[:, 2], 0.0)
    centred = np.all(np.abs(err) < 0.006, axis=1)
    gap_rate = np.where(centred | grasped, target_gap - st.gap_eef, cfg.gap_init - st.gap_eef) * 20.0
    lift = grasped & (np.abs(st.gap_eef - target_gap) < 0.003)
    v[:, 1] = np.where(lift, cfg.max_speed, v[:, 1])
    act[:, :3] = v / cfg.max_speed
    act[:, 3] = 5.0 * (st.q_obj - st.eef_yaw)
    act[:, 4] = -5.0 * st.eef_pitch
    act[:, 5] = gap_rate / cfg.max_gap_rate
    return np.clip(act, -1.0, 1.0)


def run_scripted(cfg: sim.EnvConfig, n_episodes: int, seed: int = 0):
    """Max lift height and grasp flag per episode, one env per episode."""
    rngs = [np.random.default_rng(sim.env_seed(seed, i)) for i in range(n_episodes)]
    st = sim.reset(cfg, rngs)
    max_h = np.zeros(n_episodes)
    for _ in range(cfg.episode_length):
        st = sim.step(cfg, st, controller(cfg, st))
        max_h = np.maximum(max_h, st.h)
    return max_h
