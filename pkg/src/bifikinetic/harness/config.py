"""Experiment configuration files.

JSON schema (every key optional except ``scenario.family``)::

    {
      "scenario": {"family": "double_peak", "nx": 50, "nv_high": 16, ...},
      "budget": 30,
      "r_list": [2, 4, 6],
      "workers": 1
    }

``scenario`` accepts every :class:`ScenarioConfig` field.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from ..scenarios import ScenarioConfig

CONFIG_ENV = "BIFIKINETIC_CONFIG"
TOP_KEYS = {"scenario", "budget", "r_list", "workers"}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    budget: int = 30
    r_list: tuple = field(default_factory=tuple)
    workers: int = 1

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "budget": self.budget,
            "r_list": list(self.r_list),
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        scen = data.get("scenario")
        if not isinstance(scen, dict) or "family" not in scen:
            raise ConfigError("config needs a 'scenario' object with a 'family'")
        try:
            return cls(
                ScenarioConfig.from_dict(scen),
                int(data.get("budget", 30)),
                tuple(int(r) for r in data.get("r_list", ())),
                int(data.get("workers", 1)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def resolve_config_path(cli_path) -> Path | None:
    env = os.environ.get(CONFIG_ENV)
    if env:
        return Path(env)
    return Path(cli_path) if cli_path else None


def load_config(path, paper_scale: bool = False) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if paper_scale and isinstance(data, dict) and isinstance(data.get("scenario"), dict):
        scen = dict(data["scenario"])
        family = scen.pop("family", None)
        if family is None:
            raise ConfigError("config needs a 'scenario' object with a 'family'")
        try:
            base = ScenarioConfig.paper_scale(family).to_dict()
        except KeyError as exc:
            raise ConfigError(f"unknown scenario family {family!r}") from exc
        for key in ("nx", "dt", "nv_high", "nv_low", "n_train", "n_test"):
            scen.pop(key, None)
        base.update(scen)
        data = dict(data, scenario=base)
    return ExperimentConfig.from_dict(data)
