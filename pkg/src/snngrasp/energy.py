"""Operation-count energy model for the spiking net and the ANN baseline.

The encoder layer of the spiking net is charged full multiply-accumulates
for every hidden neuron that fires; the readout layer is charged additions
only. The ANN is charged multiply-accumulates in both layers, scaled by the
fraction of nonzero inputs to each layer.

Energies are in picojoules. ``display`` values divide by 1e6, which is the
number printed in the published comparison table (its "mJ" label does not
match pJ unit costs; the numerals are what we reproduce).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

DISPLAY_DIVISOR = 1e6
TABLE_SIZES = (29, 256, 7)


@dataclass(frozen=True)
class OpCosts:
    alpha_m: float = 4.6
    alpha_a: float = 0.9

    def __post_init__(self):
        if self.alpha_m <= 0 or self.alpha_a <= 0:
            raise ValueError("operation costs must be positive")


@dataclass
class ActivityTrace:
    """Counters accumulated over an evaluation run.

    ``batch`` samples are each simulated for ``steps`` network timesteps
    (control steps x window for the spiking net, control steps for the ANN).
    """

    kind: str
    batch: int
    steps: int
    sizes: tuple
    hidden_spikes: int = 0
    output_active: list = field(default_factory=list)
    input_nonzero: int = 0
    hidden_nonzero: int = 0

    def __post_init__(self):
        self.sizes = tuple(int(n) for n in self.sizes)
        if not self.output_active:
            self.output_active = [False] * self.sizes[2]

    @property
    def slots(self) -> int:
        return self.batch * self.steps

    def validate(self) -> None:
        if self.kind not in ("snn", "ann"):
            raise ValueError(f"unknown trace kind {self.kind!r}")
        if self.batch < 1 or self.steps < 1:
            raise ValueError("empty trace")
        n0, n1, n2 = self.sizes
        if len(self.output_active) != n2:
            raise ValueError("output indicator count does not match N2")
        if not 0 <= self.hidden_spikes <= self.slots * n1:
            raise ValueError("hidden spike count exceeds B*T*N1")
        if not 0 <= self.input_nonzero <= self.slots * n0:
            raise ValueError("input nonzero count exceeds B*T*N0")
        if not 0 <= self.hidden_nonzero <= self.slots * n1:
            raise ValueError("hidden nonzero count exceeds B*T*N1")

    def merge(self, other: "ActivityTrace") -> "ActivityTrace":
        """Combine counters of two runs over the same network and window."""
        if (self.kind, self.steps, self.sizes) != (other.kind, other.steps, other.sizes):
            raise ValueError("traces are not compatible")
        return ActivityTrace(
            self.kind,
            self.batch + other.batch,
            self.steps,
            self.sizes,
            self.hidden_spikes + other.hidden_spikes,
            [a or b for a, b in zip(self.output_active, other.output_active)],
            self.input_nonzero + other.input_nonzero,
            self.hidden_nonzero + other.hidden_nonzero,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ActivityTrace":
        doc = json.loads(text)
        trace = cls(**doc)
        trace.validate()
        return trace

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ActivityTrace":
        return cls.from_json(Path(path).read_text())


def spike_rates(trace: ActivityTrace) -> tuple[float, float]:
    """``(r, r_mem)``: hidden firing fraction and fraction of ever-active outputs."""
    trace.validate()
    n1, n2 = trace.sizes[1], trace.sizes[2]
    r = trace.hidden_spikes / (trace.slots * n1)
    r_mem = sum(bool(a) for a in trace.output_active) / n2
    return r, r_mem


def ann_rates(trace: ActivityTrace) -> tuple[float, float]:
    """``(r_in, r_out)``: nonzero fractions of the input and hidden activations."""
    trace.validate()
    n0, n1 = trace.sizes[0], trace.sizes[1]
    return trace.input_nonzero / (trace.slots * n0), trace.hidden_nonzero / (trace.slots * n1)


def snn_energy(r, r_mem, batch, steps, sizes=TABLE_SIZES, costs: OpCosts = OpCosts()) -> float:
    n0, n1, n2 = sizes
    am, aa = costs.alpha_m, costs.alpha_a
    return batch * steps * (n1 * r * (n0 * am + (n0 - 1) * aa) + n2 * r_mem * n1 * aa)


def ann_energy(r_in, r_out, batch, steps, sizes=TABLE_SIZES, costs: OpCosts = OpCosts()) -> float:
    n0, n1, n2 = sizes
    am, aa = costs.alpha_m, costs.alpha_a
    return batch * steps * (
        n1 * r_in * (n0 * am + (n0 - 1) * aa) + n2 * r_out * (n1 * am + (n1 - 1) * aa)
    )


def savings(e_snn: float, e_ann: float) -> float:
    """Percent saved by the spiking net; unrounded."""
    if e_ann <= 0:
        raise ValueError("ANN energy must be positive to define savings")
    return (1.0 - e_snn / e_ann) * 100.0


def crossover_rate(r_mem, r_in, r_out, sizes=TABLE_SIZES, costs: OpCosts = OpCosts()) -> float:
    """Hidden firing rate at which the two estimates are equal (batch and steps cancel)."""
    n0, n1, n2 = sizes
    per_spike = n1 * (n0 * costs.alpha_m + (n0 - 1) * costs.alpha_a)
    fixed = n2 * r_mem * n1 * costs.alpha_a
    return (ann_energy(r_in, r_out, 1, 1, sizes, costs) - fixed) / per_spike


@dataclass
class EnergyReport:
    r: float
    r_mem: float
    r_in: float
    r_out: float
    batch: int
    steps: int
    sizes: tuple
    e_snn: float
    e_ann: float
    savings_pct: float
    source: str = "published"

    @property
    def e_snn_display(self) -> float:
        return self.e_snn / DISPLAY_DIVISOR

    @property
    def e_ann_display(self) -> float:
        return self.e_ann / DISPLAY_DIVISOR

    CSV_COLUMNS = (
        "source", "r", "r_mem", "r_in", "r_out", "B", "T", "N0", "N1", "N2",
        "e_snn_pj", "e_ann_pj", "e_snn_table", "e_ann_table", "savings_pct",
    )

    def csv_row(self) -> list:
        return [
            self.source, repr(self.r), repr(self.r_mem), repr(self.r_in), repr(self.r_out),
            self.batch, self.steps, *self.sizes, repr(self.e_snn), repr(self.e_ann),
            f"{self.e_snn_display:.2f}", f"{self.e_ann_display:.2f}", f"{self.savings_pct:.2f}",
        ]

    def text(self) -> str:
        n0, n1, n2 = self.sizes
        return "\n".join([
            "[energy]",
            f"source = {self.source}",
            f"B = {self.batch}",
            f"T = {self.steps}",
            f"N0 = {n0}",
            f"N1 = {n1}",
            f"N2 = {n2}",
            f"snn.r = {self.r:.6g}",
            f"snn.r_mem = {self.r_mem:.6g}",
            f"ann.r_in = {self.r_in:.6g}",
            f"ann.r_out = {self.r_out:.6g}",
            f"snn.energy_pj = {self.e_snn:.6e}",
            f"ann.energy_pj = {self.e_ann:.6e}",
            f"snn.energy_table = {self.e_snn_display:.2f}",
            f"ann.energy_table = {self.e_ann_display:.2f}",
            f"savings_pct = {self.savings_pct:.2f}",
            "# table units = pJ / 1e6 (numerically uJ); the published table labels them mJ",
            "",
        ])


def report(r, r_mem, r_in, r_out, batch=8192, steps=500, sizes=TABLE_SIZES,
           costs: OpCosts = OpCosts(), source="published") -> EnergyReport:
    for name, val in (("r", r), ("r_mem", r_mem), ("r_in", r_in), ("r_out", r_out)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} = {val} outside [0, 1]")
    e_s = snn_energy(r, r_mem, batch, steps, sizes, costs)
    e_a = ann_energy(r_in, r_out, batch, steps, sizes, costs)
    return EnergyReport(r, r_mem, r_in, r_out, batch, steps, tuple(sizes), e_s, e_a, savings(e_s, e_a), source)


PUBLISHED = {"r": 0.34, "r_mem": 1.0, "r_in": 1.0, "r_out": 0.44}


def record(policy, venv, control_steps: int) -> ActivityTrace:
    """Run ``policy`` deterministically on ``venv`` and count the activity the model needs.

    Does not touch the policy's weights.
    """
    from .snn import SpikingNetwork

    is_snn = isinstance(policy, SpikingNetwork)
    kind = "snn" if is_snn else "ann"
    window = policy.window if is_snn else 1
    trace = ActivityTrace(kind, venv.n, control_steps * window, policy.sizes)
    active = np.zeros(policy.sizes[2], dtype=bool)
    obs = venv.observe()
    for _ in range(control_steps):
        mean, _, cache = policy.act(obs)
        if is_snn:
            trace.hidden_spikes += int(cache.spikes.sum())
            active |= np.any(np.abs(cache.out_membrane) > 0, axis=(0, 1))
        else:
            trace.input_nonzero += int(cache.input_active.sum())
            trace.hidden_nonzero += int(cache.hidden_active.sum())
        obs, _, _, _ = venv.step(mean)
    trace.output_active = active.tolist()
    trace.validate()
    return trace
