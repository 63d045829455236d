import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from snngrasp import env as sim
from snngrasp.curriculum import (
    CurriculumConfig,
    Stage,
    StageProgress,
    advance,
    approach_success,
    lift_success,
    make_stage,
    strong_lift,
    success,
)
from snngrasp.rewards import RewardParams
from snngrasp.vecenv import GraspVecEnv

P = RewardParams()
CFG = sim.EnvConfig()


def grasp_state(with_contact=True):
    """Cube centred between the fingertips with the gap at s + epsilon."""
    st_ = sim.reset(CFG, 0)
    st_.p_mid[0] = st_.p_obj[0]
    st_.gap_eef[0] = st_.s_obj[0] + P.epsilon
    if with_contact:
        st_.f_lf[0] = [0.0, 0.0, 1.0]
        st_.f_rf[0] = [0.0, 0.0, -1.0]
    return st_


def progress_with(rate, updates, window=10):
    p = StageProgress(window=window, updates_in_stage=updates)
    for _ in range(window):
        p.record(rate)
    return p


class TestSuccess:
    def test_all_grasp_criteria_met(self):
        st_ = grasp_state()
        tf = sim.tactile_features(st_)
        assert approach_success(st_, P)[0]
        assert success(make_stage(1, 0), st_, tf, P)[0]
        assert success(make_stage(1, 1000), st_, tf, P)[0]

    def test_no_lift_at_rest(self):
        st_ = grasp_state()
        assert not success(make_stage(2), st_, sim.tactile_features(st_), P)[0]

    def test_channel_switch(self):
        st_ = grasp_state(with_contact=False)
        tf = sim.tactile_features(st_)
        cfg = CurriculumConfig(handover_updates=100)
        assert make_stage(1, 99, cfg).criterion == "geometric_grasp"
        assert success(make_stage(1, 99, cfg), st_, tf, P)[0]
        assert make_stage(1, 100, cfg).criterion == "tactile_grasp"
        assert not success(make_stage(1, 100, cfg), st_, tf, P)[0]

    def test_strong_lift_implies_lift(self, rng):
        st_ = sim.reset(CFG, [np.random.default_rng(i) for i in range(500)])
        st_.p_obj[:, 1] += rng.uniform(-0.1, 0.4, 500)
        strong = strong_lift(st_, P)
        assert strong.any()
        assert np.all(lift_success(st_, P)[strong])


class TestAdvance:
    def test_both_conditions_met(self):
        assert advance(progress_with(0.9, 60), 0) == 1

    def test_dwell_not_met(self):
        assert advance(progress_with(0.9, 10), 0) == 0

    def test_rate_not_met(self):
        assert advance(progress_with(0.7, 200), 1) == 1

    def test_terminal_stage(self):
        assert advance(progress_with(1.0, 1000), 2) == 2
        assert advance(progress_with(0.0, 0), 2) == 2

    def test_rolling_rate_needs_full_window(self):
        p = StageProgress(window=3, updates_in_stage=100)
        p.record(1.0)
        p.record(1.0)
        assert p.rolling_rate == 0.0 and advance(p, 0) == 0
        p.record(1.0)
        assert p.rolling_rate == 1.0

    def test_rate_validated(self):
        with pytest.raises(ValueError):
            StageProgress().record(1.5)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=200))
    def test_stage_never_decreases(self, rates):
        stage, prog, seen = 0, StageProgress(), []
        for r in rates:
            prog.record(r)
            prog.updates_in_stage += 1
            new = advance(prog, stage)
            assert new >= stage
            if new != stage:
                prog = StageProgress()
            stage = new
            seen.append(stage)
        assert seen == sorted(seen) and max(seen) <= Stage.TASK

    def test_zero_success_never_advances(self):
        prog = StageProgress()
        for _ in range(500):
            prog.record(0.0)
            prog.updates_in_stage += 1
            assert advance(prog, 0) == 0


class TestVecEnv:
    def test_per_env_streams_independent_of_batch_size(self):
        a = GraspVecEnv(CFG, P, 4, seed=11)
        b = GraspVecEnv(CFG, P, 9, seed=11)
        np.testing.assert_array_equal(a.state.p_obj, b.state.p_obj[:4])

    def test_finished_episodes_reported_and_reset(self):
        cfg = sim.EnvConfig(episode_length=5, stagger_start=False)
        venv = GraspVecEnv(cfg, P, 3, seed=0)
        for _ in range(5):
            _, reward, done, info = venv.step(np.zeros((3, 6)))
        assert done.all()
        assert set(info["terms"]) == {"r_geo", "r_sym", "r_hover", "r_tg", "r_pl"}
        finished = venv.pop_finished()
        assert len(finished) == 3 and all(set(e) >= {"success", "grasp", "lift"} for e in finished)
        assert np.all(venv.state.t == 0) and venv.pop_finished() == []

    def test_reward_includes_time_penalty(self):
        cfg = sim.EnvConfig(stagger_start=False)
        venv = GraspVecEnv(cfg, P, 2, seed=1)
        _, reward, _, info = venv.step(np.zeros((2, 6)))
        t = info["terms"]
        np.testing.assert_allclose(reward, t["r_geo"] + t["r_sym"] + t["r_hover"] - P.time_penalty)

    def test_stagger_start_spreads_episode_clocks(self):
        venv = GraspVecEnv(CFG, P, 32, seed=0)
        assert len(np.unique(venv.state.t)) > 1
        assert np.all((venv.state.t >= 0) & (venv.state.t < CFG.episode_length))
