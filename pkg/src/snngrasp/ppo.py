"""PPO with GAE for the spiking policy and the ANN baseline.

Both networks expose ``act(obs) -> (mean, value, cache)`` and
``grads(cache, d_mean, d_value, d_log_std) -> dict``, so the update below
only deals with the loss and its derivatives with respect to the outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .snn import LOG_STD_MAX, LOG_STD_MIN, NumericalDivergenceError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    epochs: int = 4
    minibatch: int = 512
    lr: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    horizon: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    reward_scale: float = 0.1  # keeps value targets O(1)

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("ppo.gamma must lie in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("ppo.gae_lambda must lie in [0, 1]")
        if not self.clip_ratio > 0:
            raise ValueError("ppo.clip_ratio must be > 0")
        if self.epochs < 1:
            raise ValueError("ppo.epochs must be >= 1")
        if self.minibatch < 1 or self.horizon < 1:
            raise ValueError("ppo.minibatch and ppo.horizon must be >= 1")
        if self.lr < 0 or self.max_grad_norm <= 0:
            raise ValueError("ppo.lr must be >= 0 and ppo.max_grad_norm > 0")
        if self.reward_scale <= 0:
            raise ValueError("ppo.reward_scale must be > 0")


class Adam:
    """Adaptive-moment optimizer over a dict of arrays, updated in place."""

    def __init__(self, params: dict, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def gaussian_logp(actions, mean, log_std):
    z = (actions - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


def gaussian_entropy(log_std) -> float:
    return float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))


@dataclass
class RolloutBuffer:
    """Time-major ``(horizon, n_envs, ...)`` arrays from one collection pass."""

    obs: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    last_value: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    hidden_rate: float = 0.0

    @property
    def horizon(self) -> int:
        return self.rewards.shape[0]

    def __len__(self) -> int:
        return self.rewards.size


def hidden_activity(net, cache) -> float:
    """Mean hidden firing (SNN) or nonzero (ANN) fraction for one forward pass."""
    if hasattr(cache, "spikes"):
        return float(cache.spikes.mean())
    return float(cache.hidden_active.mean())


def collect(venv, policy, horizon: int, rng: np.random.Generator, reward_scale: float = 1.0,
            on_step=None) -> RolloutBuffer:
    """Step every environment ``horizon`` times with sampled Gaussian actions."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n, n_act = venv.n, policy.n_actions
    obs = venv.observe()
    buf = RolloutBuffer(
        obs=np.empty((horizon, n, obs.shape[1])),
        actions=np.empty((horizon, n, n_act)),
        logp=np.empty((horizon, n)),
        rewards=np.empty((horizon, n)),
        values=np.empty((horizon, n)),
        dones=np.empty((horizon, n)),
        last_value=np.empty(n),
    )
    activity = 0.0
    std = np.exp(policy.log_std)
    for t in range(horizon):
        mean, value, cache = policy.act(obs)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(value))):
            raise NumericalDivergenceError(f"policy produced non-finite output at rollout step {t}")
        activity += hidden_activity(policy, cache)
        action = mean + std * rng.standard_normal(mean.shape)
        buf.obs[t] = obs
        buf.actions[t] = action
        buf.logp[t] = gaussian_logp(action, mean, policy.log_std)
        buf.values[t] = value
        obs, reward, done, info = venv.step(action)
        buf.rewards[t] = reward * reward_scale
        buf.dones[t] = done
        if on_step is not None:
            on_step(buf.obs[t], reward, done, info)
    _, buf.last_value[:], _ = policy.act(obs)
    buf.hidden_rate = activity / horizon
    return buf


def gae(rewards, values, dones, bootstrap_value, gamma: float, lam: float):
    """Generalized advantage estimates and returns (time along axis 0).

    ``dones[t]`` marks that the episode ended after step ``t``; nothing
    past such a step leaks into ``advantages[t]``.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if not rewards.shape == values.shape == dones.shape:
        raise ValueError("rewards, values and dones must have equal shapes")
    bootstrap_value = np.broadcast_to(np.asarray(bootstrap_value, dtype=float), rewards.shape[1:])
    adv = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    next_value = bootstrap_value
    for t in range(rewards.shape[0] - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * live * next_value - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


def clipped_surrogate(ratio, adv, clip: float) -> float:
    ratio, adv = np.asarray(ratio, float), np.asarray(adv, float)
    return float(np.mean(np.minimum(ratio * adv, np.clip(ratio, 1 - clip, 1 + clip) * adv)))


@dataclass
class UpdateStats:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    kl: float = 0.0
    clip_frac: float = 0.0
    grad_norm: float = 0.0


def normalize(adv):
    if adv.size < 2:
        return adv - adv.mean()
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def minibatch_loss(policy, obs, actions, logp_old, adv, returns, values_old, cfg: PpoConfig):
    """Loss terms for one minibatch and the gradient dict of their weighted sum."""
    n = obs.shape[0]
    mean, value, cache = policy.act(obs)
    log_std = policy.log_std
    logp = gaussian_logp(actions, mean, log_std)
    log_ratio = logp - logp_old
    ratio = np.exp(log_ratio)
    clipped = np.clip(ratio, 1 - cfg.clip_ratio, 1 + cfg.clip_ratio)
    surr = np.minimum(ratio * adv, clipped * adv)
    policy_loss = -float(np.mean(surr))

    v_clip = values_old + np.clip(value - values_old, -cfg.clip_ratio, cfg.clip_ratio)
    l_raw = (value - returns) ** 2
    l_clip = (v_clip - returns) ** 2
    value_loss = 0.5 * float(np.mean(np.maximum(l_raw, l_clip)))
    entropy = gaussian_entropy(log_std)
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    if not math.isfinite(loss):
        raise NumericalDivergenceError("non-finite PPO loss")

    # d(policy_loss)/d(logp): the unclipped branch carries the gradient
    active = ratio * adv <= clipped * adv
    d_logp = np.where(active, -adv * ratio, 0.0) / n
    inv_var = np.exp(-2.0 * log_std)
    diff = actions - mean
    d_mean = d_logp[:, None] * diff * inv_var
    d_log_std = np.sum(d_logp[:, None] * (diff * diff * inv_var - 1.0), axis=0) - cfg.entropy_coef

    use_raw = l_raw >= l_clip
    in_band = np.abs(value - values_old) < cfg.clip_ratio
    d_value = np.where(use_raw, value - returns, np.where(in_band, v_clip - returns, 0.0))
    d_value = cfg.value_coef * d_value / n

    grads = policy.grads(cache, d_mean, d_value, d_log_std)
    stats = UpdateStats(
        policy_loss=policy_loss,
        value_loss=value_loss,
        entropy=entropy,
        kl=float(np.mean((ratio - 1.0) - log_ratio)),
        clip_frac=float(np.mean(np.abs(ratio - 1.0) > cfg.clip_ratio)),
    )
    return stats, grads


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


def ppo_update(policy, buf: RolloutBuffer, cfg: PpoConfig, optimizer: Adam,
               rng: np.random.Generator) -> UpdateStats:
    """Clipped-surrogate epochs over shuffled minibatches; updates ``policy`` in place."""
    if buf.advantages is None:
        buf.advantages, buf.returns = gae(
            buf.rewards, buf.values, buf.dones, buf.last_value, cfg.gamma, cfg.gae_lambda
        )
    size = len(buf)
    flat = {
        "obs": buf.obs.reshape(size, -1),
        "actions": buf.actions.reshape(size, -1),
        "logp": buf.logp.reshape(size),
        "adv": buf.advantages.reshape(size),
        "ret": buf.returns.reshape(size),
        "val": buf.values.reshape(size),
    }
    for k, v in flat.items():
        if not np.all(np.isfinite(v)):
            raise NumericalDivergenceError(f"non-finite rollout field {k}")

    params = policy.params()
    acc = UpdateStats()
    count = 0
    mb = min(cfg.minibatch, size)
    for _ in range(cfg.epochs):
        order = rng.permutation(size)
        for start in range(0, size, mb):
            idx = order[start:start + mb]
            stats, grads = minibatch_loss(
                policy,
                flat["obs"][idx],
                flat["actions"][idx],
                flat["logp"][idx],
                normalize(flat["adv"][idx]),
                flat["ret"][idx],
                flat["val"][idx],
                cfg,
            )
            stats.grad_norm = clip_grad_norm(grads, cfg.max_grad_norm)
            optimizer.step(params, grads, cfg.lr)
            np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX, out=policy.log_std)
            for f in acc.__dataclass_fields__:
                setattr(acc, f, getattr(acc, f) + getattr(stats, f))
            count += 1
    for f in acc.__dataclass_fields__:
        setattr(acc, f, getattr(acc, f) / count)
    return acc
