"""YAML experiment configs.

A config file looks like::

    experiment: lln
    seed: 20240601
    output: out/lln
    parameters:
      n_list: [100, 400, 1600]
      replicas: 10
      ...

``seed`` is mandatory.  Module subcommands use the same loader with
their own top-level keys.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from ..errors import ConfigError

EXPERIMENTS = ("lln", "holder", "chaos", "random_meanfield", "annealed_gap", "graph_convergence")


def load_yaml(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_yaml(text, source=str(path))


def parse_yaml(text: str, source: str = "<string>") -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    return data


def dump_yaml(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=None)


def config_hash(data: dict) -> str:
    return hashlib.sha256(dump_yaml(data).encode()).hexdigest()


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return seed


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    parameters: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        check_seed(self.seed)
        if not isinstance(self.parameters, dict):
            raise ConfigError("parameters must be a mapping")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - {"experiment", "seed", "parameters", "output"}
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
        for key in ("experiment", "seed"):
            if key not in data:
                raise ConfigError(f"config is missing required key {key!r}")
        return cls(data["experiment"], data["seed"], data.get("parameters") or {}, data.get("output"))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(load_yaml(path))

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(parse_yaml(text))

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment, "seed": self.seed, "parameters": self.parameters}
        if self.output is not None:
            out["output"] = self.output
        return out

    def dumps(self) -> str:
        return dump_yaml(self.to_dict())

    def hash(self) -> str:
        return config_hash(self.to_dict())
