"""Spiking actor-critic: LIF hidden layer, non-spiking LIF readout, surrogate BPTT.

The hidden layer receives the observation as a constant current through
``w_in`` for ``window`` steps. Output neurons integrate hidden spikes without
a threshold; their membrane at the last step is the readout. The last
output is the state value and the rest are action means (6 + 1 for the
default 29-256-7 layout).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_ACTIONS = 6
LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0


class NumericalDivergenceError(FloatingPointError):
    """Raised when a non-finite value reaches a network or simulator step."""


@dataclass(frozen=True)
class LifParams:
    decay: float = 0.95
    threshold: float = 1.0
    reset_mode: str = "zero"  # "zero" | "subtract"

    def __post_init__(self):
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must lie in (0, 1], got {self.decay}")
        if not self.threshold > 0.0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.reset_mode not in ("zero", "subtract"):
            raise ValueError(f"unknown reset_mode {self.reset_mode!r}")


@dataclass
class LayerState:
    membrane: np.ndarray
    spikes: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "LayerState":
        return cls(np.zeros(shape), np.zeros(shape))


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalDivergenceError(f"non-finite {what}")


def lif_step(state: LayerState, input_current: np.ndarray, params: LifParams) -> LayerState:
    """One discrete LIF update: ``V <- decay*V + I``, spike on ``V >= threshold``, then reset."""
    input_current = np.asarray(input_current, dtype=float)
    if input_current.shape != state.membrane.shape:
        raise ValueError(
            f"input current shape {input_current.shape} != layer shape {state.membrane.shape}"
        )
    _check_finite(input_current, "input current")
    v = params.decay * state.membrane + input_current
    spikes = (v >= params.threshold).astype(float)
    if params.reset_mode == "zero":
        v = v * (1.0 - spikes)
    else:
        v = v - params.threshold * spikes
    return LayerState(v, spikes)


def nlif_step(state: LayerState, input_current: np.ndarray, params: LifParams) -> LayerState:
    """Leaky integration without threshold or reset; spikes stay zero."""
    input_current = np.asarray(input_current, dtype=float)
    if input_current.shape != state.membrane.shape:
        raise ValueError(
            f"input current shape {input_current.shape} != layer shape {state.membrane.shape}"
        )
    _check_finite(input_current, "input current")
    v = params.decay * state.membrane + input_current
    return LayerState(v, np.zeros_like(v))


def surrogate_grad(v: np.ndarray, threshold: float, slope: float = 2.0) -> np.ndarray:
    """Fast-sigmoid stand-in for the Heaviside derivative."""
    out = np.abs(v - threshold)
    out *= slope
    out += 1.0
    np.square(out, out=out)
    return np.reciprocal(out, out=out)


def _uniform_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class SpikingNetwork:
    w_in: np.ndarray
    w_out: np.ndarray
    hidden_params: LifParams = field(default_factory=LifParams)
    output_params: LifParams = field(default_factory=LifParams)
    log_std: np.ndarray | None = None
    window: int = 8
    surrogate_slope: float = 2.0

    kind = "snn"

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        sizes: tuple[int, int, int] = (29, 256, 7),
        **kwargs,
    ) -> "SpikingNetwork":
        n0, n1, n2 = sizes
        return cls(_uniform_init(rng, n0, n1), _uniform_init(rng, n1, n2), **kwargs)

    @property
    def n_actions(self) -> int:
        return self.w_out.shape[1] - 1

    def __post_init__(self):
        self.w_in = np.asarray(self.w_in, dtype=float)
        self.w_out = np.asarray(self.w_out, dtype=float)
        if self.w_in.shape[1] != self.w_out.shape[0]:
            raise ValueError(f"w_in {self.w_in.shape} and w_out {self.w_out.shape} do not chain")
        if self.w_out.shape[1] < 1:
            raise ValueError("output layer must have at least one neuron")
        if self.log_std is None:
            self.log_std = np.full(self.n_actions, -0.5)
        self.log_std = np.asarray(self.log_std, dtype=float)
        if self.log_std.shape != (self.n_actions,):
            raise ValueError(f"log_std must have {self.n_actions} entries")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (self.w_in.shape[0], self.w_in.shape[1], self.w_out.shape[1])

    def params(self) -> dict[str, np.ndarray]:
        return {"w_in": self.w_in, "w_out": self.w_out, "log_std": self.log_std}

    def act(self, obs):
        return forward(self, obs)

    def grads(self, record, d_mean, d_value, d_log_std=None):
        return backward(self, record, d_mean, d_value, d_log_std)


@dataclass
class ForwardRecord:
    """Everything the backward pass and the energy counters need.

    Arrays are time-major: ``spikes[t]`` has shape ``(batch, N1)``.
    """

    obs: np.ndarray
    current: np.ndarray
    pre_membrane: np.ndarray
    spikes: np.ndarray
    out_membrane: np.ndarray

    @property
    def window(self) -> int:
        return self.spikes.shape[0]


def forward(net: SpikingNetwork, obs, window: int | None = None):
    """Run the network on a batch of observations.

    Returns ``(action_mean, value, record)``; a 1-D observation gives
    unbatched outputs.
    """
    window = net.window if window is None else window
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    obs = np.asarray(obs, dtype=float)
    single = obs.ndim == 1
    x = np.atleast_2d(obs)
    n0, n1, n2 = net.sizes
    if x.shape[1] != n0:
        raise ValueError(f"observation has {x.shape[1]} entries, network expects {n0}")
    _check_finite(x, "observation")

    current = x @ net.w_in
    _check_finite(current, "input current")
    hp, op = net.hidden_params, net.output_params
    pre = np.empty((window,) + current.shape)
    spk = np.empty((window,) + current.shape)
    # same update as lif_step, unrolled in place over the window
    v = np.zeros_like(current)
    for t in range(window):
        v *= hp.decay
        v += current
        pre[t] = v
        fired = v >= hp.threshold
        spk[t] = fired
        if hp.reset_mode == "zero":
            v[fired] = 0.0
        else:
            v -= hp.threshold * spk[t]
    # N-LIF readout: U_t = decay*U_{t-1} + s_t @ W, via filtered spike counts
    filtered = np.empty_like(spk)
    acc = np.zeros_like(current)
    for t in range(window):
        acc *= op.decay
        acc += spk[t]
        filtered[t] = acc
    mem = (filtered.reshape(-1, n1) @ net.w_out).reshape(window, x.shape[0], n2)

    readout = mem[-1]
    mean = readout[:, : n2 - 1]
    value = readout[:, n2 - 1]
    record = ForwardRecord(x, current, pre, spk, mem)
    if single:
        return mean[0], float(value[0]), record
    return mean, value, record


def backward(net: SpikingNetwork, record: ForwardRecord, d_mean, d_value, d_log_std=None):
    """Backprop through time with the surrogate spike derivative.

    The reset is treated as a constant (no gradient through the reset
    spike). Returns a dict keyed like :meth:`SpikingNetwork.params`.
    """
    n0, n1, n2 = net.sizes
    if record.spikes.shape[2] != n1 or record.out_membrane.shape[2] != n2:
        raise ValueError("forward record does not match network shape")
    batch = record.obs.shape[0]
    d_out = np.zeros((batch, n2))
    d_out[:, : n2 - 1] = np.asarray(d_mean, dtype=float).reshape(batch, n2 - 1)
    d_out[:, n2 - 1] = np.asarray(d_value, dtype=float).reshape(batch)

    T = record.window
    hp, op = net.hidden_params, net.output_params
    # dL/dU_t = decay_out^(T-1-t) * dL/dU_{T-1}
    scale = op.decay ** np.arange(T - 1, -1, -1, dtype=float)
    spike_sum = np.tensordot(scale, record.spikes, axes=(0, 0))
    g_w_out = spike_sum.T @ d_out
    d_spike_base = d_out @ net.w_out.T

    sg = surrogate_grad(record.pre_membrane, hp.threshold, net.surrogate_slope)
    g_v_post = np.zeros((batch, n1))
    g_current = np.zeros((batch, n1))
    for t in range(T - 1, -1, -1):
        g_v = sg[t] * d_spike_base
        g_v *= scale[t]
        if hp.reset_mode == "zero":
            g_v_post *= 1.0 - record.spikes[t]
        g_v += g_v_post
        g_current += g_v
        g_v_post = g_v * hp.decay

    grads = {
        "w_in": record.obs.T @ g_current,
        "w_out": g_w_out,
        "log_std": np.zeros_like(net.log_std) if d_log_std is None
        else np.asarray(d_log_std, dtype=float).copy(),
    }
    return grads
