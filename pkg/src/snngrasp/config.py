"""Run configuration: sectioned ``key = value`` text files.

Example::

    [run]
    seed = 3
    model = ann

    [ppo]
    clip_ratio = 0.1

    [env]
    spawn_lo = -0.1, -0.1, 0.05

Missing keys take their defaults; unknown sections or keys are rejected.
Tuples are written comma-separated. Sections: run, env, reward, curriculum,
ppo, snn, energy (see the dataclasses below for every key).
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .curriculum import CurriculumConfig
from .env import EnvConfig
from .ppo import PpoConfig
from .rewards import RewardParams


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    model: str = "snn"
    mode: str = "multimodal"
    out_dir: str = "runs/default"
    updates: int = 300
    envs: int = 64
    eval_trials: int = 10
    eval_evaluations: int = 2
    eval_envs: int = 32
    checkpoint_every: int = 50

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("run.seed must be a 64-bit unsigned value")
        if self.model not in ("snn", "ann"):
            raise ValueError("run.model must be snn or ann")
        if self.mode not in ("multimodal", "unimodal"):
            raise ValueError("run.mode must be multimodal or unimodal")
        if self.updates < 0:
            raise ValueError("run.updates must be >= 0")
        for name in ("envs", "eval_trials", "eval_evaluations", "eval_envs"):
            if getattr(self, name) < 1:
                raise ValueError(f"run.{name} must be >= 1")
        if self.checkpoint_every < 0:
            raise ValueError("run.checkpoint_every must be >= 0")


@dataclass(frozen=True)
class SnnConfig:
    hidden: int = 256
    decay: float = 0.95
    threshold: float = 1.0
    reset_mode: str = "zero"
    out_decay: float = 0.95
    window: int = 8
    surrogate_slope: float = 2.0
    log_std_init: float = -0.5

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError("snn.hidden must be >= 1")
        if not 0 < self.decay <= 1 or not 0 < self.out_decay <= 1:
            raise ValueError("snn.decay and snn.out_decay must lie in (0, 1]")
        if self.threshold <= 0:
            raise ValueError("snn.threshold must be > 0")
        if self.reset_mode not in ("zero", "subtract"):
            raise ValueError("snn.reset_mode must be zero or subtract")
        if self.window < 1:
            raise ValueError("snn.window must be >= 1")
        if self.surrogate_slope <= 0:
            raise ValueError("snn.surrogate_slope must be > 0")


@dataclass(frozen=True)
class EnergyConfig:
    batch: int = 8192
    steps: int = 500
    alpha_m: float = 4.6
    alpha_a: float = 0.9
    record_envs: int = 16
    record_steps: int = 100

    def __post_init__(self):
        if self.batch < 1 or self.steps < 1:
            raise ValueError("energy.batch and energy.steps must be >= 1")
        if self.alpha_m <= 0 or self.alpha_a <= 0:
            raise ValueError("energy.alpha_m and energy.alpha_a must be > 0")
        if self.record_envs < 1 or self.record_steps < 1:
            raise ValueError("energy.record_envs and energy.record_steps must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    env: EnvConfig = field(default_factory=EnvConfig)
    reward: RewardParams = field(default_factory=RewardParams)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    snn: SnnConfig = field(default_factory=SnnConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)

    def replace(self, section: str, **changes) -> "RunConfig":
        """Copy with keys of one section changed (validated)."""
        return build_config({section: changes}, base=self)


SECTIONS = tuple(f.name for f in fields(RunConfig))


def _parse_value(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(default).__name__}") from None
    return raw


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def build_config(values: dict, base: RunConfig | None = None) -> RunConfig:
    """Apply ``{section: {key: value}}`` over ``base`` with validation."""
    base = base or RunConfig()
    sections = {}
    for sec in SECTIONS:
        current = getattr(base, sec)
        changes = dict(values.get(sec, {}))
        known = {f.name for f in fields(current)}
        for key in changes:
            if key not in known:
                raise ConfigError(f"unknown key {sec}.{key}")
        try:
            sections[sec] = dataclasses.replace(current, **changes)
        except ValueError as exc:
            msg = str(exc)
            if not msg.startswith(f"{sec}."):
                bad = ", ".join(f"{sec}.{k}" for k in changes) or sec
                msg = f"{bad}: {msg}"
            raise ConfigError(msg) from None
    for sec in values:
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
    return RunConfig(**sections)


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    defaults = RunConfig()
    values: dict = {}
    for sec in parser.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        section_defaults = getattr(defaults, sec)
        known = {f.name: getattr(section_defaults, f.name) for f in fields(section_defaults)}
        for key, raw in parser.items(sec):
            if key not in known:
                raise ConfigError(f"unknown key {sec}.{key}")
            values.setdefault(sec, {})[key] = _parse_value(raw, known[key], f"{sec}.{key}")
    return build_config(values)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for sec in SECTIONS:
        lines.append(f"[{sec}]")
        part = getattr(cfg, sec)
        for f in fields(part):
            lines.append(f"{f.name} = {_format_value(getattr(part, f.name))}")
        lines.append("")
    return "\n".join(lines)
