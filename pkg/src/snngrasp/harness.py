"""Experiment orchestration: evaluation trials, the 2x2 ablation grid,
trajectory dumps, live energy recording and run manifests."""
from __future__ import annotations

import csv
import dataclasses
import platform
import sys
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import env as sim
from . import energy
from .config import RunConfig, dump_config
from .curriculum import Stage, make_stage
from .env import env_seed, mix64
from .train import build_policy, fmt, train
from .vecenv import GraspVecEnv

EVAL_SALT = 0xE7A1
TRAJ_SALT = 0x7BA7
RECORD_SALT = 0xE4E6


@dataclass
class TrialResult:
    trial: int
    grasp_success: float
    lift_success: float
    mean_reward: float
    stage_reached: int

    def __post_init__(self):
        for name in ("grasp_success", "lift_success"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")


TRIAL_COLUMNS = ("model", "mode", "seed") + tuple(f.name for f in fields(TrialResult))


def check_policy(policy, cfg: RunConfig) -> None:
    """Raise if a network's layer sizes disagree with the configuration."""
    expected = (sim.OBS_DIM, cfg.snn.hidden, 7)
    if tuple(policy.sizes) != expected:
        raise ValueError(f"policy sizes {tuple(policy.sizes)} do not match config {expected}")


def mean_actions(policy, venv: GraspVecEnv) -> np.ndarray:
    """Deterministic action: the network mean, or a scripted ``policy(cfg, state)``."""
    if hasattr(policy, "act"):
        mean, _, _ = policy.act(venv.observe())
        return mean
    return policy(venv.cfg, venv.state)


def _eval_env(cfg: RunConfig, seed: int, n: int, mode: str, stage: int = Stage.TASK) -> GraspVecEnv:
    # evaluation episodes all start at step 0 and are not reset
    env_cfg = dataclasses.replace(cfg.env, stagger_start=False)
    return GraspVecEnv(env_cfg, cfg.reward, n, seed, mode, make_stage(stage), auto_reset=False)


def run_episode(policy, venv: GraspVecEnv, on_step=None) -> dict:
    """One synchronized episode across all envs; success flags are 'at any step'."""
    total = np.zeros(venv.n)
    steps = np.zeros(venv.n)
    live = np.ones(venv.n, dtype=bool)
    for _ in range(venv.cfg.episode_length):
        action = mean_actions(policy, venv)
        obs, reward, done, _ = venv.step(action)
        total += np.where(live, reward, 0.0)
        steps += live
        if on_step is not None:
            on_step(venv, obs)
        live &= ~done
        if not live.any():
            break
    return {
        "grasp": venv.grasped.copy(),
        "lift": venv.lifted.copy(),
        "reward": float(np.mean(total / np.maximum(steps, 1))),
    }


def evaluate(policy, cfg: RunConfig, stage_reached: int = 0, mode: str | None = None,
             seed: int | None = None, on_step=None) -> list[TrialResult]:
    """``eval_trials`` trials of ``eval_evaluations`` evaluations each.

    Every evaluation places fresh objects from its own derived seed and
    scores the fraction of ``eval_envs`` parallel environments that
    grasped / lifted. Actions are deterministic means.
    """
    if hasattr(policy, "act"):
        check_policy(policy, cfg)
    mode = mode or cfg.run.mode
    seed = cfg.run.seed if seed is None else seed
    results = []
    for trial in range(cfg.run.eval_trials):
        grasp, lift, rew = [], [], []
        for k in range(cfg.run.eval_evaluations):
            eval_seed = mix64(env_seed(seed, EVAL_SALT) + trial * cfg.run.eval_evaluations + k)
            venv = _eval_env(cfg, eval_seed, cfg.run.eval_envs, mode, stage_reached)
            out = run_episode(policy, venv, on_step)
            grasp.append(out["grasp"].mean())
            lift.append(out["lift"].mean())
            rew.append(out["reward"])
        results.append(TrialResult(trial, float(np.mean(grasp)), float(np.mean(lift)),
                                   float(np.mean(rew)), int(stage_reached)))
    return results


def write_trials(path, rows) -> None:
    """Rows are ``(model, mode, seed, TrialResult)`` tuples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for model, mode, seed, res in rows:
            w.writerow([model, mode, seed] + [fmt(x) for x in astuple(res)])


ABLATION_COLUMNS = (
    "model", "mode", "seed", "updates", "final_stage", "grasp_success", "lift_success",
    "mean_reward", "nongeo_obs_absmax",
)
CONDITIONS = (("snn", "multimodal"), ("snn", "unimodal"), ("ann", "multimodal"), ("ann", "unimodal"))


def ablate(cfg: RunConfig, out_dir) -> list[dict]:
    """Train and evaluate the four model x observation-mode conditions with one shared seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for model, mode in CONDITIONS:
        sub = cfg.replace("run", model=model, mode=mode)
        cond_dir = out / f"{model}_{mode}"
        write_manifest(cond_dir, sub, ["ablate", model, mode])
        rep = train(sub, cond_dir)
        absmax = max((r["nongeo_obs_absmax"] for r in rep.rows), default=0.0)
        seen = [absmax]

        def watch(venv, obs):
            seen[0] = max(seen[0], float(np.max(np.abs(obs[:, sim.GEOMETRIC.stop:]))))

        trials = evaluate(rep.policy, sub, rep.final_stage, on_step=watch)
        write_trials(cond_dir / "trials.csv", [(model, mode, sub.run.seed, t) for t in trials])
        rows.append({
            "model": model, "mode": mode, "seed": sub.run.seed, "updates": rep.updates,
            "final_stage": rep.final_stage,
            "grasp_success": float(np.mean([t.grasp_success for t in trials])),
            "lift_success": float(np.mean([t.lift_success for t in trials])),
            "mean_reward": float(np.mean([t.mean_reward for t in trials])),
            "nongeo_obs_absmax": seen[0],
        })
    with open(out / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ABLATION_COLUMNS)
        for row in rows:
            w.writerow([fmt(row[c]) for c in ABLATION_COLUMNS])
    return rows


def dump_trajectory(policy, cfg: RunConfig, path, env_index: int = 0) -> int:
    """Write one deterministic episode of env ``env_index`` to CSV; returns the row count."""
    if hasattr(policy, "act"):
        check_policy(policy, cfg)
    n = max(env_index + 1, 1)
    venv = _eval_env(cfg, mix64(env_seed(cfg.run.seed, TRAJ_SALT)), n, cfg.run.mode)
    rows = [sim.trajectory_row(venv.state, env_index)]
    for _ in range(cfg.env.episode_length):
        _, _, done, _ = venv.step(mean_actions(policy, venv))
        rows.append(sim.trajectory_row(venv.state, env_index))
        if done[env_index]:
            break
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sim.TRAJECTORY_COLUMNS)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    return len(rows)


def record_activity(policy, cfg: RunConfig, mode: str | None = None) -> energy.ActivityTrace:
    """Activity counters from ``energy.record_steps`` deterministic steps on ``energy.record_envs`` envs."""
    check_policy(policy, cfg)
    venv = _eval_env(cfg, mix64(env_seed(cfg.run.seed, RECORD_SALT)),
                     cfg.energy.record_envs, mode or cfg.run.mode)
    return energy.record(policy, venv, cfg.energy.record_steps)


def measured_report(snn_trace: energy.ActivityTrace, ann_trace: energy.ActivityTrace,
                    cfg: RunConfig) -> energy.EnergyReport:
    """Energy comparison at the configured B, T using rates measured from two traces."""
    if snn_trace.kind != "snn" or ann_trace.kind != "ann":
        raise ValueError("expected one snn trace and one ann trace")
    if snn_trace.sizes != ann_trace.sizes:
        raise ValueError("traces come from networks of different sizes")
    r, r_mem = energy.spike_rates(snn_trace)
    r_in, r_out = energy.ann_rates(ann_trace)
    costs = energy.OpCosts(cfg.energy.alpha_m, cfg.energy.alpha_a)
    return energy.report(r, r_mem, r_in, r_out, cfg.energy.batch, cfg.energy.steps,
                         snn_trace.sizes, costs, source="measured")


def write_energy_csv(path, rep: energy.EnergyReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(energy.EnergyReport.CSV_COLUMNS)
        w.writerow(rep.csv_row())


def manifest_text(cfg: RunConfig, command) -> str:
    head = [
        "# run manifest: reload with --config to reproduce this run",
        f"# command = {' '.join(str(c) for c in command)}",
        f"# seed = {cfg.run.seed}",
        f"# snngrasp = {__version__}",
        f"# python = {platform.python_version()}",
        f"# numpy = {np.__version__}",
        f"# platform = {sys.platform}",
        "",
    ]
    return "\n".join(head) + dump_config(cfg)


def write_manifest(out_dir, cfg: RunConfig, command) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.txt"
    path.write_text(manifest_text(cfg, command))
    return path


def fresh_policy(cfg: RunConfig, model: str):
    """Untrained network for ``model``, seeded from the run seed."""
    return build_policy(cfg, model, np.random.default_rng(mix64(cfg.run.seed)))
