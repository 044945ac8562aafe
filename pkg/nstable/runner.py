#!/usr/bin/env python3
"""
Experiment runner.

Executes ExperimentConfigs, collects SimReport verdicts and writes the
report files: report.json (schema nstable-report/1), reports.jsonl (one
SimReport per line) and, when an experiment produced samples, samples.csv.
"""

import csv
import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .branching import (
    OffspringLaw,
    SimReport,
    Stopwatch,
    ctbp_limit_check,
    random_sum_check,
    scaling_limit_samples,
    simulate_bgw,
    simulate_ctbp,
)
from .config import ExperimentConfig
from .errors import ConfigError, DomainError, NStableError
from .rng import stream
from .statistics import one_sample
from .transforms import (
    bgw_limit_transform,
    bunge_map,
    commute_check,
    exponential_transform,
    poincare_residual,
    scaling_limit_check,
    semigroup_scan,
)

log = logging.getLogger(__name__)

SCHEMA = "nstable-report/1"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3

IDENTITY_Z = 5.0
MASS_Z = 4.0
MASS_POINTS = 10
POINCARE_GRID = np.linspace(0.0, 20.0, 201)
COMMUTE_GRID = np.linspace(0.0, 1.0, 101)
LIMIT_GRID = np.linspace(0.0, 5.0, 51)

Samples = Dict[str, np.ndarray]
Handler = Callable[[ExperimentConfig, Stopwatch], Tuple[List[SimReport], Samples]]


@dataclass
class RunResult:
    exit_code: int
    report: Optional[dict] = None
    paths: Dict[str, str] = field(default_factory=dict)
    error: Optional[str] = None


def _report(config: ExperimentConfig, watch: Stopwatch, statistic: str, value, threshold, ok: bool, details=None):
    return SimReport(
        statistic_name=statistic,
        value=float(value),
        threshold=float(threshold),
        verdict="pass" if ok else "fail",
        n=config.n,
        seed=config.seed,
        runtime_ms=watch.elapsed_ms,
        experiment=config.label,
        details=details or {},
    )


def _z_score(observed: float, expected: float, stderr: float) -> float:
    if stderr > 0:
        return abs(observed - expected) / stderr
    return 0.0 if math.isclose(observed, expected, rel_tol=1e-12, abs_tol=1e-12) else math.inf


def _mean_report(config, watch, populations: np.ndarray, expected: float, statistic: str, overflow: bool):
    values = populations.astype(float)
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    z = _z_score(float(values.mean()), expected, stderr)
    return _report(
        config, watch, statistic, z, IDENTITY_Z, z < IDENTITY_Z and not overflow,
        {"sample_mean": float(values.mean()), "expected": expected, "stderr": stderr, "overflow": overflow},
    )


# --- command handlers ----------------------------------------------------------------------


def _verify_stability(config: ExperimentConfig, watch: Stopwatch):
    config.require("N")
    if config.X is None and config.L is None:
        raise ConfigError("verify-stability needs --X or --L")
    N = config.obj("N")
    reports = []
    if config.X is not None:
        law = config.obj("X")
        c = config.c
        if c is None:
            if not math.isfinite(N.mean):
                raise ConfigError(f"{N.label} has infinite mean; pass --c")
            alpha = law.exponent.alpha if law.exponent is not None else 1.0
            c = N.mean ** (1.0 / alpha)
        stat = random_sum_check(N, law, c, config.n, config.seed)
        threshold = config.significance if stat.uses_ks else stat.threshold
        reports.append(
            _report(config, watch, stat.statistic_name, stat.value, threshold, stat.passes(config.significance), dict(stat.to_dict(), c=c))
        )
    if config.L is not None:
        L = config.obj("L")
        c = config.c
        if c is None:
            if not math.isfinite(N.mean):
                raise ConfigError(f"{N.label} has infinite mean; pass --c")
            c = N.mean
        residual = poincare_residual(N, L, c, POINCARE_GRID)
        reports.append(
            _report(config, watch, "poincare_residual", residual, config.tolerance, residual < config.tolerance, {"c": c, "transform": L.name})
        )
    return reports, {}


def _semigroup_scan(config: ExperimentConfig, watch: Stopwatch):
    config.require("L", "c_grid")
    scan = semigroup_scan(config.obj("L"), config.grid, config.order, config.threads)
    violations = scan.closure_violations()
    details = scan.to_dict()
    details["closure_violations"] = [list(pair) for pair in violations]
    return [_report(config, watch, "closure_violations", len(violations), 0, not violations, details)], {}


def _commute_check(config: ExperimentConfig, watch: Stopwatch):
    if config.N is not None and config.M is not None:
        maps = [config.obj("N"), config.obj("M")]
        labels = [m.label for m in maps]
    elif config.L is not None and config.c_grid is not None:
        L = config.obj("L")
        maps = [bunge_map(L, c) for c in config.grid]
        labels = [repr(m) for m in maps]
    else:
        raise ConfigError("commute-check needs --N and --M, or --L and --c-grid")
    gap = max((commute_check(a, b, COMMUTE_GRID) for a, b in itertools.combinations(maps, 2)), default=0.0)
    return [_report(config, watch, "commutator_gap", gap, config.tolerance, gap < config.tolerance, {"maps": labels})], {}


def _simulate_bgw(config: ExperimentConfig, watch: Stopwatch):
    config.require("N")
    law = OffspringLaw(config.obj("N"))
    result = simulate_bgw(law, config.generations, config.n, config.seed, threads=config.threads)
    reports = []
    if math.isfinite(law.mean):
        expected = law.mean**config.generations
        reports.append(_mean_report(config, watch, result.final, expected, "branching_identity_z", result.overflowed))
    q_k = 0.0
    for _ in range(config.generations):
        q_k = float(law.pgf(q_k))
    extinct = float(np.mean(result.final == 0))
    stderr = math.sqrt(q_k * (1.0 - q_k) / config.n)
    z = _z_score(extinct, q_k, stderr)
    reports.append(
        _report(config, watch, "extinction_z", z, IDENTITY_Z, z < IDENTITY_Z, {"extinct_fraction": extinct, "expected": q_k, "stderr": stderr})
    )
    return reports, {"N_k": result.final}


def _simulate_ctbp(config: ExperimentConfig, watch: Stopwatch):
    config.require("H")
    H = config.obj("H")
    result = simulate_ctbp(H, config.t_end, config.n, config.seed, threads=config.threads)
    if math.isfinite(H.mean):
        expected = math.exp(H.growth_rate * config.t_end)
        report = _mean_report(config, watch, result.final, expected, "branching_identity_z", bool(result.overflow.any()))
    else:
        fraction = float(result.overflow.mean())
        report = _report(config, watch, "overflow_fraction", fraction, 0.0, fraction == 0.0, {"method": result.method})
    return [report], {"log_N_t": result.final_log}


def _mass_report(config, watch, counts: np.ndarray, masses: np.ndarray):
    observed = np.bincount(np.clip(counts, 0, masses.size).astype(np.int64), minlength=masses.size + 1)[: masses.size]
    frequencies = observed / counts.size
    stderr = np.sqrt(masses * (1.0 - masses) / counts.size)
    scores = [_z_score(f, m, s) for f, m, s in zip(frequencies, masses, stderr)]
    worst = max(scores)
    return _report(
        config, watch, "mass_z", worst, MASS_Z, worst < MASS_Z,
        {"frequencies": frequencies.tolist(), "masses": masses.tolist()},
    )


def _sample(config: ExperimentConfig, watch: Stopwatch):
    if config.X is not None:
        law = config.obj("X")
        samples = law.sample(config.n, config.seed)
        stat = one_sample(samples, cdf=law.cdf, transform=law.transform, kind=law.kind, heavy_tailed=True)
        report = _report(config, watch, stat.statistic_name, stat.value, stat.threshold, stat.passes(), dict(stat.to_dict(), law=law.label))
        return [report], {"X": samples}
    if config.N is not None:
        law = OffspringLaw(config.obj("N"))
        counts = law.sample(config.n, stream(config.seed, "sample", role="N"))
        return [_mass_report(config, watch, counts, law.masses(MASS_POINTS))], {"N": counts}
    raise ConfigError("sample needs --X or --N")


def _limit_check(config: ExperimentConfig, watch: Stopwatch):
    if config.H is not None:
        stat = ctbp_limit_check(config.obj("H"), config.t_end, config.n, config.seed, LIMIT_GRID)
        threshold = config.significance if stat.uses_ks else stat.threshold
        return [_report(config, watch, stat.statistic_name, stat.value, threshold, stat.passes(config.significance), stat.to_dict())], {}
    if config.N is not None:
        family = config.obj("N")
        scaled = scaling_limit_samples(family, config.generations, config.n, config.seed, threads=config.threads)
        if scaled.norming == "median":
            report = _report(
                config, watch, "median_constant", scaled.constant, 0.0, True,
                {"norming": "median", "overflow_count": scaled.overflow_count},
            )
            return [report], {"W": scaled.samples}
        if family.name == "geometric":
            stat = one_sample(
                scaled.samples,
                cdf=lambda x: 1.0 - np.exp(-np.maximum(x, 0.0)),
                transform=exponential_transform(),
                u_grid=LIMIT_GRID,
                kind="laplace",
            )
        else:
            stat = one_sample(scaled.samples, transform=bgw_limit_transform(family), u_grid=LIMIT_GRID, kind="laplace")
        threshold = config.significance if stat.uses_ks else stat.threshold
        report = _report(
            config, watch, stat.statistic_name, stat.value, threshold, stat.passes(config.significance),
            dict(stat.to_dict(), constant=scaled.constant, overflow_count=scaled.overflow_count),
        )
        return [report], {"W": scaled.samples}
    if config.L is not None and config.c_grid is not None:
        grid = config.grid
        gap = scaling_limit_check(config.obj("L"), grid, LIMIT_GRID)
        threshold = 1.0 / math.sqrt(max(grid))
        return [_report(config, watch, "scaling_gap", gap, threshold, gap < threshold, {"c": max(grid)})], {}
    raise ConfigError("limit-check needs --H, --N, or --L with --c-grid")


HANDLERS: Dict[str, Handler] = {
    "verify-stability": _verify_stability,
    "semigroup-scan": _semigroup_scan,
    "commute-check": _commute_check,
    "simulate-bgw": _simulate_bgw,
    "simulate-ctbp": _simulate_ctbp,
    "sample": _sample,
    "limit-check": _limit_check,
}


# --- reports -------------------------------------------------------------------------------


def _provenance(config: ExperimentConfig) -> dict:
    payload = config.to_dict()
    for key in ("out", "threads"):
        payload.pop(key, None)
    return payload


def report_digest(report: dict) -> str:
    """SHA-256 of the canonical report JSON without runtime_ms fields and without the digest."""
    stripped = dict(report)
    stripped.pop("digest", None)
    stripped["reports"] = [{k: v for k, v in r.items() if k != "runtime_ms"} for r in report["reports"]]
    canonical = json.dumps(stripped, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_report(configs: Sequence[ExperimentConfig], reports: Sequence[SimReport]) -> dict:
    config = _provenance(configs[0]) if len(configs) == 1 else {"experiments": [_provenance(c) for c in configs]}
    report = {
        "schema": SCHEMA,
        "toolkit_version": __version__,
        "config": config,
        "reports": [r.to_dict() for r in reports],
    }
    report["digest"] = report_digest(report)
    return report


def write_samples_csv(samples: Dict[str, np.ndarray], path: Path) -> None:
    """One column per sample vector, shorter columns padded with empty cells."""
    columns = list(samples)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in itertools.zip_longest(*(samples[c].tolist() for c in columns), fillvalue=""):
            writer.writerow(row)


def write_outputs(report: dict, samples: Dict[str, np.ndarray], out_dir) -> Dict[str, str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"report": str(out_dir / "report.json"), "records": str(out_dir / "reports.jsonl")}
    with open(paths["report"], "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    with open(paths["records"], "w", encoding="utf-8") as f:
        for record in report["reports"]:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    if samples:
        paths["samples"] = str(out_dir / "samples.csv")
        write_samples_csv(samples, Path(paths["samples"]))
    log.info(f"wrote {', '.join(paths.values())}")
    return paths


def run_experiment(config: ExperimentConfig) -> Tuple[List[SimReport], Samples]:
    log.info(f"running {config.label} (seed {config.seed})")
    watch = Stopwatch()
    reports, samples = HANDLERS[config.command](config, watch)
    for report in reports:
        log.info(f"{config.label}: {report.statistic_name}={report.value:.6g} ({report.verdict})")
    return reports, samples


def run(configs, out=None) -> RunResult:
    """
    Run one config or a suite and write the report files.

    Exit codes: 0 every verdict passed, 1 some verdict failed, 2 config
    error, 3 numerical domain error or any other failure inside a command.
    """
    configs = [configs] if isinstance(configs, ExperimentConfig) else list(configs)
    reports: List[SimReport] = []
    samples: Samples = {}
    operation = "run"
    try:
        if not configs:
            raise ConfigError("nothing to run")
        for config in configs:
            operation = config.command
            produced, vectors = run_experiment(config)
            reports.extend(produced)
            samples.update({f"{config.label}:{key}": np.asarray(value) for key, value in vectors.items()})
    except ConfigError as e:
        log.error(f"config error: {e}")
        return RunResult(EXIT_CONFIG, error=str(e))
    except DomainError as e:
        log.error(f"domain error in {e.operation}: {e}")
        return RunResult(EXIT_DOMAIN, error=str(e))
    except NStableError as e:
        log.error(f"{type(e).__name__}: {e}")
        return RunResult(EXIT_CONFIG, error=str(e))
    except Exception as e:
        log.exception(f"{operation} failed")
        return RunResult(EXIT_DOMAIN, error=f"{operation}: {type(e).__name__}: {e}")
    report = build_report(configs, reports)
    out = out if out is not None else configs[0].out
    paths = write_outputs(report, samples, out) if out is not None else {}
    code = EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL
    return RunResult(code, report, paths)
