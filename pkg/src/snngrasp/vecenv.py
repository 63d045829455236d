"""Stateful batch of grasping environments with curriculum rewards and auto-reset."""
from __future__ import annotations

import numpy as np

from . import env as sim
from .curriculum import (
    CurriculumStage,
    lift_success,
    make_stage,
    strong_lift,
    success,
    tactile_grasp,
)
from .rewards import RewardParams, all_terms


class GraspVecEnv:
    """``n_envs`` independent episodes stepped together.

    Each environment owns a generator seeded by ``env_seed(seed, i)`` and
    draws every reset from it, so results do not depend on batch order.
    Episodes end on the time limit or when the cube escapes the workspace;
    finished-episode outcomes are queued until :meth:`pop_finished`. With
    ``cfg.stagger_start`` the first episode of each env starts at a random
    step index.
    """

    def __init__(
        self,
        cfg: sim.EnvConfig,
        reward_params: RewardParams,
        n_envs: int,
        seed: int,
        mode: str = "multimodal",
        stage: CurriculumStage | None = None,
        auto_reset: bool = True,
    ):
        if n_envs < 1:
            raise ValueError("n_envs must be >= 1")
        if mode not in sim.MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.cfg = cfg
        self.params = reward_params
        self.n = n_envs
        self.mode = mode
        self.stage = stage or make_stage(0)
        self.auto_reset = auto_reset
        self.rngs = [np.random.default_rng(sim.env_seed(seed, i)) for i in range(n_envs)]
        self.state = sim.reset(cfg, self.rngs)
        if cfg.stagger_start and auto_reset:
            # desynchronize episode ends so every update sees finished episodes
            self.state.t[:] = [g.integers(0, cfg.episode_length) for g in self.rngs]
        self._clear_flags(np.ones(n_envs, dtype=bool))
        self.finished: list[dict] = []

    def _clear_flags(self, mask):
        if not hasattr(self, "achieved"):
            self.achieved = np.zeros(self.n, dtype=bool)
            self.grasped = np.zeros(self.n, dtype=bool)
            self.lifted = np.zeros(self.n, dtype=bool)
            self.lifted_high = np.zeros(self.n, dtype=bool)
            self.ep_return = np.zeros(self.n)
        for arr in (self.achieved, self.grasped, self.lifted, self.lifted_high):
            arr[mask] = False
        self.ep_return[mask] = 0.0

    def set_stage(self, stage: CurriculumStage) -> None:
        self.stage = stage

    def observe(self) -> np.ndarray:
        return sim.observe(self.cfg, self.state, self.mode, self.stage.index)

    def step(self, actions):
        """Returns ``(obs, reward, done, info)``; ``obs`` is post-reset for finished envs."""
        self.state = sim.step(self.cfg, self.state, actions)
        st = self.state
        tactile = sim.tactile_features(st)
        terms = all_terms(st, tactile, self.params)
        reward = sum(w * terms[k] for k, w in self.stage.reward_weights.items()) - self.params.time_penalty

        self.achieved |= success(self.stage, st, tactile, self.params)
        self.grasped |= tactile_grasp(tactile, self.params)
        self.lifted |= lift_success(st, self.params)
        self.lifted_high |= strong_lift(st, self.params)
        self.ep_return += reward

        done = (st.t >= self.cfg.episode_length) | sim.escaped(self.cfg, st)
        info = {"terms": terms, "success": self.achieved.copy()}
        if np.any(done):
            for i in np.flatnonzero(done):
                self.finished.append(
                    {
                        "success": bool(self.achieved[i]),
                        "grasp": bool(self.grasped[i]),
                        "lift": bool(self.lifted[i]),
                        "strong_lift": bool(self.lifted_high[i]),
                        "return": float(self.ep_return[i]),
                    }
                )
            if self.auto_reset:
                self._reset_envs(done)
        return self.observe(), reward, done, info

    def _reset_envs(self, mask) -> None:
        idx = np.flatnonzero(mask)
        fresh = sim.reset(self.cfg, [self.rngs[i] for i in idx])
        for name in self.state.__dataclass_fields__:
            getattr(self.state, name)[idx] = getattr(fresh, name)
        self._clear_flags(mask)

    def pop_finished(self) -> list[dict]:
        out, self.finished = self.finished, []
        return out
