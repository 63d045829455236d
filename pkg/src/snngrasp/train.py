"""End-to-end training loop: collect, GAE, PPO update, curriculum step, logging."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint
from .ann import AnnNetwork
from .config import RunConfig
from .curriculum import StageProgress, advance, make_stage
from .env import GEOMETRIC, env_seed, mix64
from .ppo import Adam, collect, gae, ppo_update
from .rewards import TERMS
from .snn import LifParams, SpikingNetwork
from .vecenv import GraspVecEnv

log = logging.getLogger(__name__)

METRICS_COLUMNS = (
    "update", "stage", "mean_reward", "success_rate", "grasp_success", "lift_success",
    "policy_loss", "value_loss", "kl", "clip_frac", "hidden_spike_rate",
    "window_success", "criterion", "weights", "nongeo_obs_absmax",
)
REWARD_COLUMNS = ("update", "stage") + TERMS


def build_policy(cfg: RunConfig, model: str | None = None, rng: np.random.Generator | None = None):
    """Freshly initialized network for ``model`` (defaults to ``cfg.run.model``)."""
    model = model or cfg.run.model
    rng = rng if rng is not None else np.random.default_rng(mix64(cfg.run.seed))
    sizes = (29, cfg.snn.hidden, 7)
    log_std = np.full(6, cfg.snn.log_std_init)
    if model == "snn":
        return SpikingNetwork.init(
            rng,
            sizes,
            hidden_params=LifParams(cfg.snn.decay, cfg.snn.threshold, cfg.snn.reset_mode),
            output_params=LifParams(cfg.snn.out_decay, cfg.snn.threshold, cfg.snn.reset_mode),
            log_std=log_std,
            window=cfg.snn.window,
            surrogate_slope=cfg.snn.surrogate_slope,
        )
    if model == "ann":
        return AnnNetwork.init(rng, sizes, log_std=log_std)
    raise ValueError(f"unknown model {model!r}")


def fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


@dataclass
class TrainReport:
    updates: int = 0
    final_stage: int = 0
    stage_history: list = field(default_factory=list)
    advanced_at: list = field(default_factory=list)
    best_stage0_rate: float = 0.0
    rows: list = field(default_factory=list)
    policy: object = None
    out_dir: Path | None = None


def _fraction(flags) -> float:
    return float(np.mean(flags)) if len(flags) else float("nan")


def train(cfg: RunConfig, out_dir=None, policy=None, stop_at_stage: int | None = None) -> TrainReport:
    """Train one agent. Writes ``metrics.csv``, ``rewards.csv`` and checkpoints to ``out_dir``.

    With ``stop_at_stage`` the run ends as soon as the curriculum reaches that stage.
    """
    out = Path(out_dir or cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = cfg.run
    policy = policy if policy is not None else build_policy(cfg)
    rng = np.random.default_rng(mix64(env_seed(run.seed, 0x5EED)))
    stage_idx = cfg.curriculum.start_stage
    progress = StageProgress(window=cfg.curriculum.window)
    stage = make_stage(stage_idx, 0, cfg.curriculum)
    venv = GraspVecEnv(cfg.env, cfg.reward, run.envs, run.seed, run.mode, stage)
    optimizer = Adam(policy.params(), cfg.ppo.beta1, cfg.ppo.beta2, cfg.ppo.adam_eps)
    report = TrainReport(policy=policy, out_dir=out)

    def save(tag: str, u: int) -> None:
        checkpoint.save(policy, out / f"checkpoint_{tag}.json",
                        meta={"update": u, "stage": stage_idx, "seed": run.seed, "model": policy.kind})

    save("initial", 0)
    with open(out / "metrics.csv", "w", newline="") as mf, open(out / "rewards.csv", "w", newline="") as rf:
        metrics = csv.writer(mf, lineterminator="\n")
        rewards = csv.writer(rf, lineterminator="\n")
        metrics.writerow(METRICS_COLUMNS)
        rewards.writerow(REWARD_COLUMNS)
        mf.flush()
        rf.flush()
        for u in range(1, run.updates + 1):
            term_sums = {k: 0.0 for k in TERMS}

            def on_step(obs, reward, done, info):
                for k in TERMS:
                    term_sums[k] += float(np.mean(info["terms"][k]))

            buf = collect(venv, policy, cfg.ppo.horizon, rng, cfg.ppo.reward_scale, on_step)
            buf.advantages, buf.returns = gae(
                buf.rewards, buf.values, buf.dones, buf.last_value, cfg.ppo.gamma, cfg.ppo.gae_lambda
            )
            stats = ppo_update(policy, buf, cfg.ppo, optimizer, rng)

            done_eps = venv.pop_finished()
            window = _fraction([e["success"] for e in done_eps])
            if done_eps:
                progress.record(window)
            progress.updates_in_stage += 1
            if stage_idx == 0:
                report.best_stage0_rate = max(report.best_stage0_rate, progress.rolling_rate)

            row = [
                u, stage_idx, float(buf.rewards.mean() / cfg.ppo.reward_scale), progress.rolling_rate,
                _fraction([e["grasp"] for e in done_eps]), _fraction([e["lift"] for e in done_eps]),
                stats.policy_loss, stats.value_loss, stats.kl, stats.clip_frac, buf.hidden_rate,
                window, stage.criterion,
                ";".join(f"{k}:{w!r}" for k, w in stage.reward_weights.items()),
                float(np.max(np.abs(buf.obs[..., GEOMETRIC.stop:]))),
            ]
            metrics.writerow([fmt(x) for x in row])
            rewards.writerow([fmt(x) for x in [u, stage_idx] + [term_sums[k] / buf.horizon for k in TERMS]])
            mf.flush()
            rf.flush()
            report.rows.append(dict(zip(METRICS_COLUMNS, row)))

            new_idx = advance(progress, stage_idx, cfg.curriculum)
            if new_idx != stage_idx:
                log.info("update %d: stage %d -> %d (rolling success %.3f)",
                         u, stage_idx, new_idx, progress.rolling_rate)
                stage_idx = new_idx
                progress = StageProgress(window=cfg.curriculum.window)
                report.advanced_at.append(u)
                save(f"stage{stage_idx}", u)
            stage = make_stage(stage_idx, progress.updates_in_stage, cfg.curriculum)
            venv.set_stage(stage)
            report.stage_history.append(stage_idx)
            if run.checkpoint_every and u % run.checkpoint_every == 0:
                save(f"{u:05d}", u)
            report.updates = u
            if stop_at_stage is not None and stage_idx >= stop_at_stage:
                break

    save("final", report.updates)
    report.final_stage = stage_idx
    return report
