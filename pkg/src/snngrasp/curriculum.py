"""Three-stage curriculum with two channels.

Channel 1 is the reward composition (which terms, at what weight); channel 2
is the success criterion that decides when a stage is mastered. Stage II
switches its criterion from geometric to tactile grasping part-way through.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .env import TactileFeatures, WorldState
from .rewards import RewardParams, all_terms, distances, mid_offset


class Stage(IntEnum):
    EXPLORATION = 0
    SKILL = 1
    TASK = 2


# reward-channel weights per stage; earlier terms decay as focus shifts
STAGE_WEIGHTS = {
    Stage.EXPLORATION: {"r_geo": 1.0, "r_sym": 1.0, "r_hover": 1.0},
    Stage.SKILL: {"r_geo": 0.5, "r_sym": 0.5, "r_hover": 0.5, "r_tg": 1.0},
    Stage.TASK: {"r_geo": 0.25, "r_sym": 0.25, "r_hover": 0.25, "r_tg": 0.5, "r_pl": 1.0},
}


@dataclass(frozen=True)
class CurriculumConfig:
    advance_rate: float = 0.8
    window: int = 10
    min_updates: int = 50
    handover_updates: int = 100
    start_stage: int = 0

    def __post_init__(self):
        if not 0.0 <= self.advance_rate <= 1.0:
            raise ValueError("curriculum.advance_rate must lie in [0, 1]")
        if self.window < 1 or self.min_updates < 0 or self.handover_updates < 0:
            raise ValueError("curriculum.window must be >= 1 and update counts >= 0")
        if self.start_stage not in (0, 1, 2):
            raise ValueError("curriculum.start_stage must be 0, 1 or 2")


@dataclass(frozen=True)
class CurriculumStage:
    stage: Stage
    reward_weights: dict
    criterion: str  # approach | geometric_grasp | tactile_grasp | lift

    @property
    def index(self) -> int:
        return int(self.stage)


def make_stage(stage: int, updates_in_stage: int = 0, cfg: CurriculumConfig = CurriculumConfig()):
    stage = Stage(stage)
    if stage is Stage.EXPLORATION:
        criterion = "approach"
    elif stage is Stage.SKILL:
        criterion = "geometric_grasp" if updates_in_stage < cfg.handover_updates else "tactile_grasp"
    else:
        criterion = "lift"
    return CurriculumStage(stage, dict(STAGE_WEIGHTS[stage]), criterion)


def stage_reward(stage: CurriculumStage, state: WorldState, tactile: TactileFeatures, params: RewardParams):
    terms = all_terms(state, tactile, params)
    return sum(w * terms[name] for name, w in stage.reward_weights.items())


def approach_success(state, params: RewardParams):
    _, d2, _ = distances(state)
    return (d2 < params.delta2) & (mid_offset(state) < params.delta1)


def geometric_grasp(state, params: RewardParams):
    _, d2, _ = distances(state)
    fit = np.abs(state.gap_eef - (state.s_obj + params.epsilon)) < params.epsilon
    return fit & (d2 < params.delta2)


def tactile_grasp(tactile: TactileFeatures, params: RewardParams):
    return (tactile.contact_lf > 0) & (tactile.contact_rf > 0) & (tactile.symmetry_s < params.f_tol)


def lift_success(state, params: RewardParams):
    return state.h > params.h1


def strong_lift(state, params: RewardParams):
    return state.h > params.h2


def success(stage: CurriculumStage, state: WorldState, tactile: TactileFeatures, params: RewardParams):
    """Stage success flag per environment, judged by the stage's success channel."""
    if stage.criterion == "approach":
        return approach_success(state, params)
    if stage.criterion == "geometric_grasp":
        return geometric_grasp(state, params)
    if stage.criterion == "tactile_grasp":
        return tactile_grasp(tactile, params)
    if stage.criterion == "lift":
        return lift_success(state, params)
    raise ValueError(f"unknown success criterion {stage.criterion!r}")


@dataclass
class StageProgress:
    window: int = 10
    rates: deque = field(default_factory=deque)
    updates_in_stage: int = 0

    def record(self, rate: float) -> None:
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"success rate {rate} outside [0, 1]")
        self.rates.append(float(rate))
        while len(self.rates) > self.window:
            self.rates.popleft()

    @property
    def rolling_rate(self) -> float:
        """Mean over the last ``window`` evaluation windows; 0 until that many exist."""
        if len(self.rates) < self.window:
            return 0.0
        return float(np.mean(self.rates))


def advance(progress: StageProgress, stage: int, cfg: CurriculumConfig = CurriculumConfig()) -> int:
    """Next stage index; moves forward only, never past the last stage."""
    stage = int(stage)
    if stage >= Stage.TASK:
        return int(Stage.TASK)
    if progress.rolling_rate >= cfg.advance_rate and progress.updates_in_stage >= cfg.min_updates:
        return stage + 1
    return stage
