"""Experiment configuration: versioned YAML schema and resolution.

A config file may override any subset of the defaults; the fully
resolved configuration is written into every output directory so a run
can be replayed from its snapshot alone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import presets
from .agent import AgentConfig, ConfigError, epsilon_decay_for
from .baselines import SupervisedConfig
from .simulator import Environment, TrajectoryPlan
from .tracking import EkfConfig

CONFIG_SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    schema_version: int = CONFIG_SCHEMA_VERSION
    run_id: str = "run"
    seed: int = 0
    scale: float = 1.0
    environment: str = "env1"  # preset name
    environment2: str = "env2"  # adaptation target preset
    trajectory: str = "reference"  # reference | random
    episodes: int = 1000
    episodes_env1: int = 500  # adaptation: episodes before the switch
    epsilon_decay_episodes: int = 300  # episodes until epsilon ~ 2 * eps_min
    adapt_epsilon_max: float = 0.5  # re-raised exploration after a switch
    agent: AgentConfig = field(default_factory=AgentConfig)
    ekf: EkfConfig = field(default_factory=EkfConfig)
    supervised: SupervisedConfig = field(default_factory=SupervisedConfig)

    def resolve(self) -> "ExperimentConfig":
        """Apply the scale knob and derived defaults in place."""
        self.agent.width_scale = self.scale
        self.supervised.width_scale = self.scale
        plan = self.plan()
        steps_per_episode = int(
            round(self.plan_duration(plan) * plan.sample_rate)
        )
        train_steps = max(1, int(steps_per_episode * self.agent.train_fraction))
        self.agent.epsilon_decay = epsilon_decay_for(
            max(1, self.epsilon_decay_episodes * train_steps),
            self.agent.epsilon_min,
            self.agent.epsilon_max,
        )
        start = plan.waypoints[0]
        self.ekf.initial_position = (float(start[0]), float(start[1]))
        self.agent.validate()
        return self

    def env(self, which: int = 1) -> Environment:
        return presets.environment(self.environment if which == 1 else self.environment2)

    def plan(self, rng=None) -> TrajectoryPlan:
        if self.trajectory == "reference":
            return presets.reference_plan(self.scale)
        if self.trajectory == "random":
            rng = rng if rng is not None else np.random.default_rng(self.seed + 7)
            return presets.random_plan(rng, scale=self.scale)
        raise ConfigError(f"unknown trajectory: {self.trajectory}")

    @staticmethod
    def plan_duration(plan: TrajectoryPlan) -> float:
        pts = np.asarray(plan.waypoints, dtype=float)
        seg = np.diff(pts, axis=0)
        return float(np.hypot(seg[:, 0], seg[:, 1]).sum() / plan.speed)

    def to_dict(self) -> dict:
        return asdict(self)


def _apply(dc, overrides: dict, path: str):
    valid = {f.name for f in fields(dc)}
    for key, val in overrides.items():
        if key not in valid:
            raise ConfigError(f"unknown config key: {path}{key}")
        current = getattr(dc, key)
        if hasattr(current, "__dataclass_fields__"):
            if not isinstance(val, dict):
                raise ConfigError(f"{path}{key} must be a mapping")
            _apply(current, val, f"{path}{key}.")
        else:
            if isinstance(current, tuple) and isinstance(val, list):
                val = tuple(val)
            setattr(dc, key, val)


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        with Path(path).open() as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping")
        version = raw.pop("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(
                f"config schema version {version} != {CONFIG_SCHEMA_VERSION}"
            )
        _apply(cfg, raw, "")
    if overrides:
        _apply(cfg, overrides, "")
    return cfg


def save_config(cfg: ExperimentConfig, path):
    with Path(path).open("w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
