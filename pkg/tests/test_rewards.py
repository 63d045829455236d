import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from snngrasp import env as sim
from snngrasp.curriculum import Stage, make_stage, stage_reward
from snngrasp.rewards import (
    RewardParams,
    all_terms,
    geo_reward,
    hover_reward,
    pl_reward,
    r_geo,
    r_hover,
    r_pl,
    r_sym,
    r_tg,
    sym_reward,
    tg_reward,
)

P = RewardParams()
N_STATES = 10_000


def random_states(rng, n=N_STATES):
    p_obj = rng.uniform(-0.3, 0.3, (n, 3))
    return sim.WorldState(
        p_mid=rng.uniform(-0.3, 0.3, (n, 3)),
        eef_yaw=rng.uniform(-np.pi, np.pi, n),
        eef_pitch=rng.uniform(-np.pi / 2, np.pi / 2, n),
        v_eef=rng.normal(size=(n, 3)),
        gap_eef=rng.uniform(0, 0.15, n),
        p_obj=p_obj,
        v_obj=rng.normal(size=(n, 3)) * 0.1,
        q_obj=rng.uniform(-1, 1, n),
        w_obj=rng.normal(size=n),
        f_lf=rng.normal(size=(n, 3)) * (rng.random((n, 1)) < 0.5),
        f_rf=rng.normal(size=(n, 3)) * (rng.random((n, 1)) < 0.5),
        s_obj=rng.uniform(0.04, 0.08, n),
        p_obj0=p_obj - np.stack([np.zeros(n), rng.uniform(0, 0.5, n), np.zeros(n)], -1),
        t=np.zeros(n, dtype=np.int64),
    )


class TestClosedForm:
    def test_geo_example(self):
        p = RewardParams(alpha=(1, 1, 1, 0.5, 1), lam=(5, 5, 5, 10, 10, 50, 1))
        assert geo_reward(0.1, 0.1, 0.1, p) == pytest.approx(1.6137, abs=1e-4)
        assert geo_reward(0.1, 0.1, 0.1, p) == pytest.approx(3 * (1 - math.tanh(0.5)), abs=1e-12)

    def test_geo_limits(self):
        assert geo_reward(0, 0, 0, P) == pytest.approx(sum(P.alpha[:3]))
        assert geo_reward(1e3, 1e3, 1e3, P) == pytest.approx(0.0, abs=1e-9)

    def test_sym_example(self):
        p = RewardParams(alpha=(0.5, 0.5, 0.3, 1.0, 1.0), lam=(5, 5, 8, 10, 10, 50, 1), gamma1=2, delta1=0.03)
        assert sym_reward(0.05, 0.01, p) == pytest.approx(0.5779, abs=1e-4)
        assert sym_reward(0.05, 0.01, p) == pytest.approx(1 - math.tanh(0.5) + 0.04, abs=1e-12)

    def test_sym_maximal_and_clamped(self):
        assert sym_reward(0.0, 0.0, P) == pytest.approx(P.alpha[3] + P.gamma1 * P.delta1)
        assert sym_reward(0.0, P.delta1, P) == pytest.approx(P.alpha[3])
        assert sym_reward(0.0, 1.0, P) == pytest.approx(P.alpha[3])

    def test_hover_examples(self):
        assert hover_reward(P.delta2, P) == -1.0
        assert -1.0 < hover_reward(0.5 * P.delta2, P) < 0.0
        p = RewardParams(lam=(5, 5, 8, 10, 10, 50, 1), delta2=0.05)
        assert hover_reward(0.15, p) == pytest.approx(-math.e, abs=1e-12)

    def test_tg_example(self):
        p = RewardParams(alpha=(0.5, 0.5, 0.3, 0.5, 1.0), lam=(5, 5, 8, 10, 10, 50, 1), epsilon=0.01)
        s = 0.05
        val = tg_reward(s + 0.01 + 0.02, s, 1.0, 1.5, 0.4, 0.4, 1, 1, p)
        assert val == pytest.approx(2.0369, abs=1e-4)
        assert val == pytest.approx(math.exp(-1) + 0.5 * ((1 - math.tanh(0.5)) + 0.8 + 2), abs=1e-12)

    def test_tg_matched_balanced_orthogonal(self):
        s = 0.06
        assert tg_reward(s + P.epsilon, s, 2.0, 2.0, 0.0, 0.0, 1, 1, P) == pytest.approx(P.alpha[4] + 1.5)

    def test_tg_without_contact(self):
        s, err = 0.06, 0.013
        val = tg_reward(s + P.epsilon + err, s, 0, 0, 0, 0, 0, 0, P)
        assert val == pytest.approx(P.alpha[4] * math.exp(-P.lam[5] * err) + 0.5)

    def test_pl_example(self):
        p = RewardParams(alpha8=1.0, alpha9=2.0, gamma2=5.0, delta3=0.02)
        assert pl_reward(0.9, 0.1, p) == pytest.approx(2.1, abs=1e-12)

    def test_pl_extremes(self):
        assert pl_reward(1.0, 1.0, P) == pytest.approx(P.alpha8 + P.alpha9 * P.gamma2)
        assert pl_reward(0.0, 0.0, P) == pytest.approx(P.alpha9 * P.gamma2 * P.delta3)


class TestStateTerms:
    def test_home_pose_upright(self):
        st_ = sim.reset(sim.EnvConfig(), 0)
        np.testing.assert_allclose(st_.y_eef[0], [0, -1, 0], atol=1e-15)
        assert r_pl(st_, P)[0] == pytest.approx(P.alpha8 + P.alpha9 * P.gamma2 * P.delta3)

    def test_symmetric_fingers_at_home(self):
        st_ = sim.reset(sim.EnvConfig(), 0)
        st_.p_mid[0] = st_.p_obj[0]
        assert r_sym(st_, P)[0] == pytest.approx(P.alpha[3] + P.gamma1 * P.delta1)

    def test_bounds_over_random_states(self, rng):
        states = random_states(rng)
        tf = sim.tactile_features(states)
        g, s, h = r_geo(states, P), r_sym(states, P), r_hover(states, P)
        assert np.all((g >= 0) & (g <= sum(P.alpha[:3])))
        assert np.all((s >= 0) & (s <= P.alpha[3] + P.gamma1 * P.delta1))
        assert np.all(h < 0)
        lift = r_pl(states, P) - P.alpha8 * (-states.y_eef[:, 1])
        assert np.all(states.h >= 0)
        assert np.all((lift >= P.alpha9 * P.gamma2 * P.delta3 - 1e-12) & (lift <= P.alpha9 * P.gamma2 + 1e-12))
        assert np.all(np.isfinite(r_tg(states, tf, P)))

    def test_translation_invariance(self, rng):
        states = random_states(rng, 2000)
        offset = rng.uniform(-1, 1, 3)
        moved = states.copy()
        for name in ("p_mid", "p_obj", "p_obj0"):
            getattr(moved, name)[:] += offset
        a = all_terms(states, sim.tactile_features(states), P)
        b = all_terms(moved, sim.tactile_features(moved), P)
        for k in ("r_geo", "r_sym", "r_hover", "r_tg"):
            np.testing.assert_allclose(a[k], b[k], atol=1e-9)


class TestMonotonicity:
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(1e-4, 0.5), st.integers(0, 2))
    def test_geo_strictly_decreasing_in_each_distance(self, d1, d2, d3, bump, which):
        d = [d1, d2, d3]
        e = list(d)
        e[which] += bump
        # tanh saturates in floating point far out; strictness holds where it is resolvable
        if d[which] * P.lam[which] < 5:
            assert geo_reward(*e, P) < geo_reward(*d, P)
        else:
            assert geo_reward(*e, P) <= geo_reward(*d, P)

    def test_geo_decreasing_over_many_samples(self, rng):
        d = rng.uniform(0, 0.5, (N_STATES, 3))
        for i in range(3):
            e = d.copy()
            e[:, i] += rng.uniform(1e-3, 0.1, N_STATES)
            assert np.all(geo_reward(*e.T, P) < geo_reward(*d.T, P))

    def test_lift_term_non_decreasing_in_h(self, rng):
        h = np.sort(rng.uniform(-0.1, 1.5, N_STATES))
        lift = pl_reward(0.0, h, P)
        assert np.all(np.diff(lift) >= 0)


class TestStageComposition:
    def test_stage_one_is_plain_sum(self, rng):
        states = random_states(rng, 50)
        tf = sim.tactile_features(states)
        val = stage_reward(make_stage(Stage.EXPLORATION), states, tf, P)
        np.testing.assert_allclose(val, r_geo(states, P) + r_sym(states, P) + r_hover(states, P))

    def test_stage_three_linear_lift_segment(self):
        st_ = sim.reset(sim.EnvConfig(), 1)
        tf = sim.tactile_features(st_)
        stage = make_stage(Stage.TASK)
        base = stage_reward(stage, st_, tf, P)
        lifted = st_.copy()
        lifted.p_obj0[:, 1] -= 0.1  # h = 0.1 with every other quantity unchanged
        diff = stage_reward(stage, lifted, tf, P) - base
        assert diff[0] == pytest.approx(P.alpha9 * P.gamma2 * 0.1, abs=1e-12)

    def test_stage_two_masked_tactile_degenerates(self):
        st_ = sim.reset(sim.EnvConfig(), 2)
        tf = sim.tactile_features(st_)  # no contact at reset
        expected = P.alpha[4] * np.exp(-P.lam[5] * np.abs(st_.gap_eef - (st_.s_obj + P.epsilon))) + 0.5
        np.testing.assert_allclose(r_tg(st_, tf, P), expected)

    def test_weights_per_stage(self):
        assert make_stage(0).reward_weights == {"r_geo": 1.0, "r_sym": 1.0, "r_hover": 1.0}
        assert make_stage(1).reward_weights["r_geo"] == 0.5 and make_stage(1).reward_weights["r_tg"] == 1.0
        w = make_stage(2).reward_weights
        assert (w["r_geo"], w["r_tg"], w["r_pl"]) == (0.25, 0.5, 1.0)


@pytest.mark.parametrize("kw", [dict(lam=(1, 1, 1, 1, 1, 1, 0)), dict(h1=0.3, h2=0.2),
                                dict(delta1=-0.1), dict(alpha=(1, 1))])
def test_params_validated(kw):
    with pytest.raises(ValueError):
        RewardParams(**kw)
