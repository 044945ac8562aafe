#!/usr/bin/env python3
"""
Catalog of named counting laws, generating distributions, closed-form laws
and Laplace transforms.

Names, parameter ranges and summaries live in data/catalog.yaml; this
module maps each name to its constructor and turns spec strings such as
"geometric:p=0.5" into objects.
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, Tuple

import yaml

from . import families, stable, transforms
from .errors import ConfigError, ParameterError

log = logging.getLogger(__name__)

CATALOG_PATH = Path(__file__).parent / "data" / "catalog.yaml"
SECTIONS = ("counting", "generating", "laws", "transforms")


def _finite(**masses):
    return families.finite_offspring({int(key[1:]): float(value) for key, value in masses.items()})


def _bgw_limit(family: str):
    return transforms.bgw_limit_transform(build("counting", str(family).replace(";", ",")))


FACTORIES: Dict[str, Dict[str, Callable]] = {
    "counting": {
        "identity": families.identity_pgf,
        "constant": families.constant_offspring,
        "finite": _finite,
        "geometric": families.geometric,
        "negbin-kM": families.negative_binomial_kM,
        "sibuya": families.sibuya,
        "chebyshev-hitting": families.chebyshev_hitting,
        "binary-split": families.binary_split,
        "shifted-geometric": families.shifted_geometric,
        "yule": families.yule_member,
        "neveu": families.neveu_member,
        "geomH-ctbp": families.geometric_H_ctbp,
        "theta": families.theta_member,
    },
    "generating": {
        "yule": families.yule_H,
        "neveu": families.neveu_H,
        "shifted-geom": families.shifted_geom_H,
        "theta": families.theta_H,
    },
    "laws": {
        "exp1": stable.exponential1,
        "gamma": stable.gamma_law,
        "linnik": stable.linnik,
        "laplace": stable.laplace_law,
        "mittag-leffler": stable.mittag_leffler,
        "kovalenko-half": stable.kovalenko_half,
        "gaussian-mix": stable.gaussian_mix,
    },
    "transforms": {
        "exponential": transforms.exponential_transform,
        "delta1": transforms.delta_transform,
        "cosh": transforms.cosh_transform,
        "gamma": transforms.gamma_transform,
        "shifted-ml": transforms.shifted_ml_transform,
        "mittag-leffler": transforms.mittag_leffler_transform,
        "bgw-limit": _bgw_limit,
    },
}


@lru_cache(maxsize=4)
def load_catalog(path: Path = CATALOG_PATH) -> Dict[str, Dict[str, dict]]:
    """Load and sanity-check the catalog file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read catalog {path}: {e}") from e
    for section in SECTIONS:
        entries = data.get(section) or {}
        missing = set(FACTORIES[section]) - set(entries)
        unknown = set(entries) - set(FACTORIES[section])
        if missing or unknown:
            raise ConfigError(f"catalog section '{section}' out of sync: missing {sorted(missing)}, unknown {sorted(unknown)}")
        undocumented = [name for name, entry in entries.items() if not entry.get("implements")]
        if undocumented:
            raise ConfigError(f"catalog section '{section}': no implements field for {undocumented}")
    return data


def _coerce(value: str) -> Any:
    for convert in (int, float):
        try:
            return convert(value)
        except ValueError:
            pass
    return value


def parse_spec(text: str) -> Tuple[str, Dict[str, Any]]:
    """Split "name:key=value,key=value" into the name and typed parameters."""
    name, _, rest = str(text).strip().partition(":")
    if not name:
        raise ConfigError(f"empty object name in '{text}'")
    params: Dict[str, Any] = {}
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"malformed parameter '{item}' in '{text}'")
        params[key.strip()] = _coerce(value.strip())
    return name, params


def names(section: str) -> list:
    return list(load_catalog()[section])


def build(section: str, text: str):
    """Construct the named object of a catalog section from its spec string."""
    if section not in SECTIONS:
        raise ConfigError(f"unknown catalog section '{section}'")
    name, params = parse_spec(text)
    entries = load_catalog()[section]
    if name not in entries:
        raise ConfigError(f"unknown {section} name '{name}'; valid names: {', '.join(entries)}")
    declared = entries[name].get("params") or {}
    if name != "finite":
        unknown = set(params) - set(declared)
        if unknown:
            raise ConfigError(f"{name}: unknown parameters {sorted(unknown)}; accepted: {sorted(declared)}")
        for key, spec in declared.items():
            if key not in params and "default" in (spec or {}):
                params[key] = spec["default"]
    try:
        return FACTORIES[section][name](**params)
    except ParameterError as e:
        raise ConfigError(f"{text}: {e}") from e
    except TypeError as e:
        raise ConfigError(f"{text}: {e}") from e


def list_catalog() -> str:
    """Every catalogued name with its parameter ranges, a one-line summary and the result it implements."""
    lines = []
    for section, entries in load_catalog().items():
        if section not in SECTIONS:
            continue
        lines.append(f"{section}:")
        for name, entry in entries.items():
            params = entry.get("params") or {}
            ranges = "; ".join(f"{key} in {spec['range']}" for key, spec in params.items())
            suffix = f" [{ranges}]" if ranges else ""
            lines.append(f"  {name}{suffix}: {entry.get('summary', '')}")
            lines.append(f"      implements: {entry['implements']}")
    return "\n".join(lines)
