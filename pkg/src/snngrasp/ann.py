"""Rectified-linear baseline with the same 29-256-7 shape as the spiking net."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .snn import NumericalDivergenceError, _uniform_init


@dataclass
class AnnNetwork:
    w_in: np.ndarray
    w_out: np.ndarray
    log_std: np.ndarray | None = None

    kind = "ann"

    @classmethod
    def init(cls, rng: np.random.Generator, sizes=(29, 256, 7), **kwargs) -> "AnnNetwork":
        n0, n1, n2 = sizes
        return cls(_uniform_init(rng, n0, n1), _uniform_init(rng, n1, n2), **kwargs)

    def __post_init__(self):
        self.w_in = np.asarray(self.w_in, dtype=float)
        self.w_out = np.asarray(self.w_out, dtype=float)
        if self.w_in.shape[1] != self.w_out.shape[0]:
            raise ValueError(f"w_in {self.w_in.shape} and w_out {self.w_out.shape} do not chain")
        if self.log_std is None:
            self.log_std = np.full(self.n_actions, -0.5)
        self.log_std = np.asarray(self.log_std, dtype=float)
        if self.log_std.shape != (self.n_actions,):
            raise ValueError(f"log_std must have {self.n_actions} entries")

    @property
    def n_actions(self) -> int:
        return self.w_out.shape[1] - 1

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (self.w_in.shape[0], self.w_in.shape[1], self.w_out.shape[1])

    def params(self) -> dict[str, np.ndarray]:
        return {"w_in": self.w_in, "w_out": self.w_out, "log_std": self.log_std}

    def act(self, obs):
        return ann_forward(self, obs)

    def grads(self, trace, d_mean, d_value, d_log_std=None):
        return ann_backward(self, trace, d_mean, d_value, d_log_std)


@dataclass
class AnnTrace:
    obs: np.ndarray
    pre_hidden: np.ndarray
    hidden: np.ndarray

    @property
    def input_active(self) -> np.ndarray:
        return self.obs > 0

    @property
    def hidden_active(self) -> np.ndarray:
        return self.hidden > 0


def ann_forward(net: AnnNetwork, obs):
    obs = np.asarray(obs, dtype=float)
    single = obs.ndim == 1
    x = np.atleast_2d(obs)
    if x.shape[1] != net.w_in.shape[0]:
        raise ValueError(f"observation has {x.shape[1]} entries, network expects {net.w_in.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise NumericalDivergenceError("non-finite observation")
    pre = x @ net.w_in
    h = np.maximum(pre, 0.0)
    out = h @ net.w_out
    mean, value = out[:, :-1], out[:, -1]
    trace = AnnTrace(x, pre, h)
    if single:
        return mean[0], float(value[0]), trace
    return mean, value, trace


def ann_backward(net: AnnNetwork, trace: AnnTrace, d_mean, d_value, d_log_std=None):
    batch, n2 = trace.obs.shape[0], net.w_out.shape[1]
    if trace.hidden.shape[1] != net.w_in.shape[1]:
        raise ValueError("trace does not match network shape")
    d_out = np.empty((batch, n2))
    d_out[:, :-1] = np.asarray(d_mean, dtype=float).reshape(batch, n2 - 1)
    d_out[:, -1] = np.asarray(d_value, dtype=float).reshape(batch)
    d_h = (d_out @ net.w_out.T) * (trace.pre_hidden > 0)
    return {
        "w_in": trace.obs.T @ d_h,
        "w_out": trace.hidden.T @ d_out,
        "log_std": np.zeros_like(net.log_std) if d_log_std is None
        else np.asarray(d_log_std, dtype=float).copy(),
    }
