#!/usr/bin/env python3
"""
Experiment configuration.

An ExperimentConfig names one command and its inputs. Suite files (YAML or
JSON) hold either a single config mapping or {"experiments": [...]};
command-line flags override the values read from a file.
"""

import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import catalog
from .errors import ConfigError

log = logging.getLogger(__name__)

COMMANDS = (
    "verify-stability",
    "semigroup-scan",
    "commute-check",
    "simulate-bgw",
    "simulate-ctbp",
    "sample",
    "limit-check",
)

# config field -> catalog section used to validate it
OBJECT_FIELDS = {"N": "counting", "M": "counting", "X": "laws", "L": "transforms", "H": "generating"}


def parse_c_grid(text: str) -> List[float]:
    """
    Parse "a..b" (step 1), "a..b,step" or an explicit list "1.25,1.5,2,e,4".
    """
    text = str(text).strip()
    try:
        if ".." in text:
            bounds, _, step = text.partition(",")
            low, _, high = bounds.partition("..")
            low, high = _number(low), _number(high)
            step = _number(step) if step else 1.0
            if step <= 0 or high < low:
                raise ConfigError(f"c-grid '{text}': need a positive step and a <= b")
            count = int(math.floor((high - low) / step + 1e-9)) + 1
            return [float(v) for v in np.round(low + step * np.arange(count), 12)]
        values = [_number(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"c-grid '{text}': {e}") from e
    if not values:
        raise ConfigError("empty c-grid")
    return values


def _number(token: str) -> float:
    token = token.strip()
    return math.e if token == "e" else float(token)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a command, the named objects it uses and its numerical settings."""

    command: str
    N: Optional[str] = None
    X: Optional[str] = None
    L: Optional[str] = None
    M: Optional[str] = None
    H: Optional[str] = None
    c: Optional[float] = None
    c_grid: Optional[str] = None
    n: int = 100_000
    seed: int = 0
    order: int = 64
    threads: int = 1
    generations: int = 20
    t_end: float = 3.0
    significance: float = 1e-3
    tolerance: float = 1e-10
    name: Optional[str] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}'; valid commands: {', '.join(COMMANDS)}")
        for key, section in OBJECT_FIELDS.items():
            value = getattr(self, key)
            if value is not None:
                catalog.build(section, value)
        if self.c_grid is not None:
            parse_c_grid(self.c_grid)
        if self.n < 1 or self.threads < 1 or self.order < 1 or self.generations < 0 or self.t_end < 0:
            raise ConfigError(f"non-positive sizes in {self.to_dict()}")

    @property
    def label(self) -> str:
        return self.name or self.command

    @property
    def grid(self) -> Optional[List[float]]:
        return None if self.c_grid is None else parse_c_grid(self.c_grid)

    def obj(self, key: str):
        """Build the catalog object named by field `key`, or None when unset."""
        value = getattr(self, key)
        return None if value is None else catalog.build(OBJECT_FIELDS[key], value)

    def require(self, *keys: str):
        missing = [key for key in keys if getattr(self, key) is None]
        if missing:
            raise ConfigError(f"{self.command} needs {', '.join('--' + k.replace('_', '-') for k in missing)}")

    def to_dict(self) -> Dict[str, Any]:
        return {key: value for key, value in asdict(self).items() if value is not None}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"experiment entry must be a mapping, got {type(data).__name__}")
        known = {f.name for f in fields(cls)}
        normalised = {key.replace("-", "_"): value for key, value in data.items()}
        unknown = set(normalised) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "command" not in normalised:
            raise ConfigError("config entry without 'command'")
        if isinstance(normalised.get("c_grid"), (list, tuple)):
            normalised["c_grid"] = ",".join(str(value) for value in normalised["c_grid"])
        try:
            return cls(**normalised)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def override(self, **values) -> "ExperimentConfig":
        """Copy with every non-None value replaced."""
        changes = {key: value for key, value in values.items() if value is not None}
        return replace(self, **changes) if changes else self


def load_suite(path) -> List[ExperimentConfig]:
    """Read a YAML/JSON suite file into a list of configs."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    entries = data.get("experiments") if isinstance(data, dict) and "experiments" in data else [data]
    if not entries:
        raise ConfigError(f"{path} holds no experiments")
    configs = [ExperimentConfig.from_dict(entry) for entry in entries]
    log.info(f"loaded {len(configs)} experiments from {path}")
    return configs
