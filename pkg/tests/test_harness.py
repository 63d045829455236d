import csv

import numpy as np
import pytest

from scripted import controller

from snngrasp import checkpoint, harness
from snngrasp.config import RunConfig, build_config, parse_config
from snngrasp.train import METRICS_COLUMNS, train


def small_cfg(**run):
    values = {
        "run": {"updates": 2, "envs": 8, "eval_trials": 2, "eval_evaluations": 1, "eval_envs": 4,
                "checkpoint_every": 0, **run},
        "snn": {"hidden": 32},
        "ppo": {"horizon": 8, "minibatch": 32},
        "env": {"episode_length": 40},
        "energy": {"record_envs": 4, "record_steps": 5},
    }
    return build_config(values)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestTrain:
    def test_zero_updates_writes_header_and_initial_checkpoint(self, tmp_path):
        rep = train(small_cfg(updates=0), tmp_path)
        assert read_csv(tmp_path / "metrics.csv") == [list(METRICS_COLUMNS)]
        assert (tmp_path / "checkpoint_initial.json").exists()
        assert rep.updates == 0

    def test_smoke_run_is_byte_reproducible(self, tmp_path):
        cfg = small_cfg()
        for name in ("a", "b"):
            train(cfg, tmp_path / name)
        for f in ("metrics.csv", "rewards.csv", "checkpoint_final.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_metrics_rows_match_updates(self, tmp_path):
        train(small_cfg(updates=3), tmp_path)
        rows = read_csv(tmp_path / "metrics.csv")
        assert rows[0][:11] == ["update", "stage", "mean_reward", "success_rate", "grasp_success",
                                "lift_success", "policy_loss", "value_loss", "kl", "clip_frac",
                                "hidden_spike_rate"]
        assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
        for r in rows[1:]:
            assert 0.0 <= float(r[10]) <= 1.0

    def test_ann_baseline_trains(self, tmp_path):
        rep = train(small_cfg(model="ann"), tmp_path)
        assert rep.policy.kind == "ann" and rep.updates == 2


class TestEvaluate:
    def test_null_policy_never_succeeds(self):
        cfg = small_cfg()
        res = harness.evaluate(lambda c, s: np.zeros((len(s), 6)), cfg)
        assert len(res) == cfg.run.eval_trials
        assert all(r.grasp_success == 0 and r.lift_success == 0 for r in res)

    def test_scripted_controller_lifts(self):
        cfg = build_config({"run": {"eval_trials": 2, "eval_evaluations": 2, "eval_envs": 16}})
        res = harness.evaluate(controller, cfg)
        assert np.mean([r.lift_success for r in res]) > 0.9
        assert all(0 <= r.grasp_success <= 1 for r in res)

    def test_same_seed_same_results(self):
        cfg = small_cfg()
        policy = harness.fresh_policy(cfg, "snn")
        assert harness.evaluate(policy, cfg) == harness.evaluate(policy, cfg)

    def test_size_mismatch_rejected(self):
        cfg = small_cfg()
        policy = harness.fresh_policy(cfg.replace("snn", hidden=16), "snn")
        with pytest.raises(ValueError):
            harness.evaluate(policy, cfg)

    def test_trials_csv(self, tmp_path):
        cfg = small_cfg()
        res = harness.evaluate(harness.fresh_policy(cfg, "ann"), cfg)
        harness.write_trials(tmp_path / "trials.csv", [("ann", "multimodal", 0, r) for r in res])
        rows = read_csv(tmp_path / "trials.csv")
        assert rows[0] == list(harness.TRIAL_COLUMNS) and len(rows) == 1 + len(res)


class TestOutputs:
    def test_trajectory_dump(self, tmp_path):
        cfg = small_cfg()
        n = harness.dump_trajectory(controller, cfg, tmp_path / "trajectory.csv")
        rows = read_csv(tmp_path / "trajectory.csv")
        assert rows[0] == ["t", "p_mid_x", "p_mid_y", "p_mid_z", "p_obj_x", "p_obj_y", "p_obj_z",
                           "gap_eef", "norm_lf", "norm_rf", "h"]
        assert len(rows) == n + 1 == cfg.env.episode_length + 2

    def test_manifest_reloads_to_same_config(self, tmp_path):
        cfg = small_cfg(seed=42)
        path = harness.write_manifest(tmp_path, cfg, ["train", "--seed", "42"])
        text = path.read_text()
        assert "seed = 42" in text and "numpy" in text
        assert parse_config(text) == cfg

    def test_ablation_grid(self, tmp_path):
        cfg = small_cfg(mode="multimodal", seed=7)
        rows = harness.ablate(cfg, tmp_path)
        assert [(r["model"], r["mode"]) for r in rows] == list(harness.CONDITIONS)
        assert {r["seed"] for r in rows} == {7}
        for r in rows:
            if r["mode"] == "unimodal":
                assert r["nongeo_obs_absmax"] == 0.0
            else:
                assert r["nongeo_obs_absmax"] > 0.0
        assert len(read_csv(tmp_path / "trials.csv")) == 5

    def test_measured_energy_report(self):
        cfg = small_cfg()
        snn = harness.record_activity(harness.fresh_policy(cfg, "snn"), cfg)
        ann = harness.record_activity(harness.fresh_policy(cfg, "ann"), cfg)
        rep = harness.measured_report(snn, ann, cfg)
        assert 0 <= rep.r <= 1 and rep.source == "measured"
        with pytest.raises(ValueError):
            harness.measured_report(ann, snn, cfg)

    def test_checkpoint_evaluates_like_live_policy(self, tmp_path):
        cfg = small_cfg()
        policy = harness.fresh_policy(cfg, "snn")
        checkpoint.save(policy, tmp_path / "p.json")
        assert harness.evaluate(checkpoint.load(tmp_path / "p.json"), cfg) == harness.evaluate(policy, cfg)


def test_default_eval_protocol():
    assert RunConfig().run.eval_trials == 10 and RunConfig().run.eval_evaluations == 2
