#!/usr/bin/env python3
"""
Monte Carlo branching engines.

Discrete-time Bienayme-Galton-Watson processes evolve population counts,
summing one offspring draw per individual (or drawing the sum directly for
convolution-closed laws). Continuous-time Markov branching processes run
the race of exponential clocks: with population n the next event comes
after an Exp(n) wait and replaces one particle by an H-distributed brood.

Replicas run in fixed blocks; block b draws from the replica-b stream of
the master seed, so results do not depend on the thread count.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, ParameterError, UnsupportedError
from .families import GeneratingDistribution, PgfFamily, geometric
from .rng import REPLICA_BLOCK, replica_blocks, stream
from .stable import ClosedFormLaw, StableExponent, evaluate_f
from .statistics import TwoSampleStat, gap_threshold, one_sample, transform_gap, two_sample
from .transforms import LaplaceSpec, ct_limit_transform, non_explosive, shifted_ml_transform

log = logging.getLogger(__name__)

POPULATION_CAP = 10**9
EVENT_CAP = 10**8
DRAW_CHUNK = 1 << 22


def _run_blocks(work: Callable, replicas: int, threads: int) -> list:
    blocks = list(replica_blocks(replicas))
    if threads <= 1 or len(blocks) == 1:
        return [work(*block) for block in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda block: work(*block), blocks))


def _per_individual_sums(sampler: Callable, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row sums of counts[i] i.i.d. draws, drawn in bounded chunks."""
    sums = np.zeros(counts.size, dtype=float)
    index = 0
    while index < counts.size:
        if counts[index] > DRAW_CHUNK:
            remaining, total = int(counts[index]), 0.0
            while remaining:
                piece = min(remaining, DRAW_CHUNK)
                total += float(np.sum(sampler(piece, rng)))
                remaining -= piece
            sums[index] = total
            index += 1
            continue
        stop = index + int(np.searchsorted(np.cumsum(counts[index:]), DRAW_CHUNK, side="right"))
        stop = max(stop, index + 1)
        chunk = counts[index:stop]
        draws = np.asarray(sampler(int(chunk.sum()), rng), dtype=float)
        owner = np.repeat(np.arange(chunk.size), chunk)
        sums[index:stop] = np.bincount(owner, weights=draws, minlength=chunk.size)
        index = stop
    return sums


# --- offspring laws ------------------------------------------------------------------------


@dataclass(frozen=True)
class OffspringLaw:
    """Counting law on {0, 1, 2, ...} driving a discrete-time branching process."""

    family: PgfFamily

    @classmethod
    def from_family(cls, family: Union["OffspringLaw", PgfFamily]) -> "OffspringLaw":
        return family if isinstance(family, OffspringLaw) else cls(family)

    @property
    def label(self) -> str:
        return self.family.label

    @property
    def mean(self) -> float:
        return self.family.mean

    def pgf(self, s):
        return self.family(s)

    def masses(self, count: int) -> np.ndarray:
        """P(N = 0), ..., P(N = count - 1) from the series seed."""
        return self.family.series(max(count - 1, 1)).coeffs[:count].copy()

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.family.sample(n, rng)

    def next_generation(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Total offspring of counts[i] individuals for every i, as floats."""
        counts = np.asarray(counts, dtype=np.int64)
        if self.family.sum_sampler is not None:
            return np.asarray(self.family.sum_sampler(counts, rng), dtype=float)
        return _per_individual_sums(self.family.sample, counts, rng)


@dataclass(frozen=True)
class BgwResult:
    """Trajectories N_0..N_k per replica; replicas past the cap are frozen at the cap."""

    populations: np.ndarray
    overflow: np.ndarray
    offspring: str
    seed: int

    @property
    def final(self) -> np.ndarray:
        return self.populations[:, -1]

    @property
    def generations(self) -> int:
        return self.populations.shape[1] - 1

    @property
    def overflowed(self) -> bool:
        return bool(self.overflow.any())


def _evolve(law: OffspringLaw, generations: int, size: int, rng, cap: int, record: bool):
    population = np.ones(size, dtype=np.int64)
    overflow = np.zeros(size, dtype=bool)
    path = np.empty((size, generations + 1), dtype=np.int64) if record else None
    if record:
        path[:, 0] = population
    for k in range(1, generations + 1):
        moving = (population > 0) & ~overflow
        if moving.any():
            born = law.next_generation(population[moving], rng)
            hit = born > cap
            population[moving] = np.minimum(born, cap).astype(np.int64)
            overflow[np.flatnonzero(moving)[hit]] = True
        elif not record:
            break
        if record:
            path[:, k] = population
    return (path if record else population), overflow


def simulate_bgw(
    offspring: Union[OffspringLaw, PgfFamily],
    generations: int,
    replicas: int,
    seed: int,
    cap: int = POPULATION_CAP,
    threads: int = 1,
    experiment: str = "bgw",
) -> BgwResult:
    """n independent trajectories of a branching process started from N_0 = 1."""
    if generations < 0 or replicas < 1:
        raise ParameterError(f"simulate_bgw: generations={generations}, replicas={replicas}")
    law = OffspringLaw.from_family(offspring)
    log.info(f"BGW {law.label}: {replicas} replicas x {generations} generations")

    def work(index, start, stop):
        rng = stream(seed, experiment, replica=index, role="offspring")
        return _evolve(law, generations, stop - start, rng, cap, record=True)

    parts = _run_blocks(work, replicas, threads)
    result = BgwResult(
        populations=np.concatenate([path for path, _ in parts]),
        overflow=np.concatenate([flags for _, flags in parts]),
        offspring=law.label,
        seed=seed,
    )
    if result.overflowed:
        log.warning(f"BGW {law.label}: {int(result.overflow.sum())} replicas hit the population cap {cap:g}")
    return result


def extinction_frequency(
    offspring: Union[OffspringLaw, PgfFamily], horizon: int, replicas: int, seed: int, threads: int = 1
) -> float:
    """Fraction of replicas extinct by generation `horizon`."""
    law = OffspringLaw.from_family(offspring)

    def work(index, start, stop):
        rng = stream(seed, "extinction", replica=index, role="offspring")
        final, _ = _evolve(law, horizon, stop - start, rng, POPULATION_CAP, record=False)
        return int(np.count_nonzero(final == 0))

    extinct = sum(_run_blocks(work, replicas, threads))
    frequency = extinct / replicas
    log.info(f"extinction {law.label}: {frequency:.5f} by generation {horizon}")
    return frequency


@dataclass(frozen=True)
class ScalingSamples:
    """N_k / C_k per replica; norming is "mean" (C_k = m^k) or "median" (empirical)."""

    samples: np.ndarray
    norming: str
    constant: float
    overflow_count: int
    generations: int


def scaling_limit_samples(
    offspring: Union[OffspringLaw, PgfFamily],
    generations: int,
    replicas: int,
    seed: int,
    norming: str = "auto",
    threads: int = 1,
) -> ScalingSamples:
    """
    Normalised populations N_k/C_k, extinct replicas included as zeros.

    With a finite mean m > 1, C_k = m^k. With an infinite mean no power of a
    constant works; "auto" then falls back to the median of the surviving
    populations and logs a warning.
    """
    law = OffspringLaw.from_family(offspring)
    mean = law.mean
    if not mean > 1:
        raise ParameterError(f"scaling limit needs a supercritical offspring law, mean {mean}")
    if norming == "auto":
        norming = "mean" if math.isfinite(mean) else "median"
    result = simulate_bgw(law, generations, replicas, seed, threads=threads, experiment="scaling")
    final = result.final.astype(float)
    if norming == "mean":
        if not math.isfinite(mean):
            raise ParameterError(f"{law.label} has infinite mean; use median norming")
        constant = mean**generations
    elif norming == "median":
        survivors = final[final > 0]
        constant = float(np.median(survivors)) if survivors.size else 1.0
        log.warning(f"{law.label}: geometric norming unavailable, using empirical median {constant:.4g}")
    else:
        raise ParameterError(f"unknown norming '{norming}'")
    return ScalingSamples(
        samples=final / constant,
        norming=norming,
        constant=constant,
        overflow_count=int(result.overflow.sum()),
        generations=generations,
    )


# --- summands and random sums --------------------------------------------------------------


@dataclass(frozen=True)
class SummandLaw:
    """i.i.d. summands X with a sampler and, where the law allows it, an exact sampler for sums."""

    name: str
    sampler: Callable[[int, np.random.Generator], np.ndarray]
    sum_sampler: Optional[Callable[[np.ndarray, np.random.Generator], np.ndarray]] = None
    heavy_tailed: bool = False
    kind: str = "chf"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self.sampler(n, rng), dtype=float)

    def sums(self, counts, rng: np.random.Generator) -> np.ndarray:
        counts = np.asarray(counts, dtype=np.int64)
        if self.sum_sampler is not None:
            return np.asarray(self.sum_sampler(counts, rng), dtype=float)
        return _per_individual_sums(self.sampler, counts, rng)

    @classmethod
    def from_law(cls, law: ClosedFormLaw) -> "SummandLaw":
        def sampler(n, rng):
            return law.sample(n, int(rng.integers(2**63)))

        sum_sampler = None
        if law.name == "exp1":
            sum_sampler = _gamma_sums(1.0, 1.0)
        elif law.name == "gamma":
            sum_sampler = _gamma_sums(law.params["shape"], law.params["rate"])
        return cls(law.label, sampler, sum_sampler, law.heavy_tailed, law.kind)


def _gamma_sums(shape: float, rate: float):
    def sum_sampler(counts, rng):
        sums = np.zeros(counts.size)
        alive = counts > 0
        sums[alive] = rng.gamma(shape * counts[alive], 1.0 / rate)
        return sums

    return sum_sampler


def exponential_summands() -> SummandLaw:
    return SummandLaw(
        "exp1",
        lambda n, rng: rng.standard_exponential(n),
        _gamma_sums(1.0, 1.0),
        kind="laplace",
    )


def rademacher_summands() -> SummandLaw:
    """Symmetric signs; k of them sum to 2 Binomial(k, 1/2) - k."""
    return SummandLaw(
        "rademacher",
        lambda n, rng: 2.0 * rng.integers(0, 2, n) - 1.0,
        lambda counts, rng: 2.0 * rng.binomial(counts, 0.5) - counts,
    )


def as_summand_law(summands) -> SummandLaw:
    if isinstance(summands, SummandLaw):
        return summands
    if isinstance(summands, ClosedFormLaw):
        return SummandLaw.from_law(summands)
    if callable(summands):
        return SummandLaw(getattr(summands, "__name__", "custom"), summands)
    raise ParameterError(f"cannot use {summands!r} as a summand law")


def random_sum_check(
    N_law: Union[OffspringLaw, PgfFamily],
    X_sampler,
    c: float,
    n: int,
    seed: int,
    u_grid=None,
) -> TwoSampleStat:
    """Two-sample comparison of X_1 + ... + X_N against cX, every ingredient on its own stream."""
    if c <= 0:
        raise ParameterError(f"random_sum_check: c={c} must be positive")
    law = OffspringLaw.from_family(N_law)
    summands = as_summand_law(X_sampler)
    counts = law.sample(n, stream(seed, "random-sum", role="N"))
    left = summands.sums(counts, stream(seed, "random-sum", role="X"))
    right = c * summands.sample(n, stream(seed, "random-sum", role="cX"))
    stat = two_sample(left, right, u_grid=u_grid, kind=summands.kind, heavy_tailed=summands.heavy_tailed)
    log.info(
        f"random sum {law.label} of {summands.name} vs {c:g}X: "
        f"ks p={stat.ks_pvalue:.3g}, gap={stat.ecf_gap:.4f} (threshold {stat.threshold:.4f})"
    )
    return stat


# --- continuous-time processes -------------------------------------------------------------


@dataclass(frozen=True)
class CtbpResult:
    """Populations at the observation times (replicas x times); log populations for marginal runs."""

    times: np.ndarray
    populations: np.ndarray
    overflow: np.ndarray
    method: str
    log_populations: Optional[np.ndarray] = None

    @property
    def final(self) -> np.ndarray:
        return self.populations[:, -1]

    @property
    def final_log(self) -> np.ndarray:
        if self.log_populations is not None:
            return self.log_populations[:, -1]
        with np.errstate(divide="ignore"):
            return np.log(self.final)


def _events_block(H: GeneratingDistribution, times: np.ndarray, size: int, rng, event_cap: int):
    population = np.ones(size, dtype=np.int64)
    clock = np.zeros(size)
    events = np.zeros(size, dtype=np.int64)
    observed = np.zeros((size, times.size))
    next_time = np.zeros(size, dtype=np.int64)
    overflow = np.zeros(size, dtype=bool)
    active = np.ones(size, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        arrival = clock[idx] + rng.exponential(1.0 / population[idx])
        # record the current population at every observation time passed before the next event
        pending = idx[arrival > times[np.minimum(next_time[idx], times.size - 1)]]
        while pending.size:
            observed[pending, next_time[pending]] = population[pending]
            next_time[pending] += 1
            done = next_time[pending] >= times.size
            keep = pending[~done]
            local = np.searchsorted(idx, keep)
            pending = keep[arrival[local] > times[next_time[keep]]]
        finished = next_time[idx] >= times.size
        firing = idx[~finished]
        clock[firing] = arrival[~finished]
        population[firing] += H.sample(firing.size, rng) - 1
        events[firing] += 1
        active[idx[finished]] = False
        extinct = firing[population[firing] == 0]
        for j in range(times.size):
            stale = extinct[next_time[extinct] <= j]
            observed[stale, j] = 0
        active[extinct] = False
        stuck = firing[(events[firing] >= event_cap) | (population[firing] > POPULATION_CAP)]
        if stuck.size:
            overflow[stuck] = True
            for j in range(times.size):
                rows = stuck[next_time[stuck] <= j]
                observed[rows, j] = np.minimum(population[rows], POPULATION_CAP)
            active[stuck] = False
    return observed, overflow


def _marginal_block(H: GeneratingDistribution, times: np.ndarray, size: int, rng):
    if times.size == 1:
        member = H.member(float(times[0]))
        if member.log_sampler is None:
            values = member.sample(size, rng).astype(float)
            with np.errstate(divide="ignore"):
                logs = np.log(values)
        else:
            logs = member.log_sampler(size, rng)
            with np.errstate(over="ignore"):
                values = np.exp(logs)
        return values[:, None], np.zeros(size, dtype=bool), logs[:, None]
    observed = np.zeros((size, times.size))
    overflow = np.zeros(size, dtype=bool)
    population = np.ones(size, dtype=np.int64)
    previous = 0.0
    for j, t in enumerate(times):
        if t > previous:
            law = OffspringLaw(H.member(float(t - previous)))
            moving = (population > 0) & ~overflow
            born = law.next_generation(population[moving], rng)
            overflow[np.flatnonzero(moving)[born > POPULATION_CAP]] = True
            population[moving] = np.minimum(born, POPULATION_CAP).astype(np.int64)
        observed[:, j] = population
        previous = t
    with np.errstate(divide="ignore"):
        logs = np.log(observed)
    return observed, overflow, logs


def simulate_ctbp(
    H: GeneratingDistribution,
    t_end: float,
    replicas: int,
    seed: int,
    method: str = "auto",
    times: Optional[Sequence[float]] = None,
    event_cap: int = EVENT_CAP,
    threads: int = 1,
) -> CtbpResult:
    """
    Population N(t) of the unit-rate process with brood law H, from N(0) = 1.

    method "events" runs the exponential-clock race; "marginal" draws from
    the family member at each observation time (chained through the Markov
    property); "auto" picks marginal when H has infinite mean.
    """
    if t_end < 0 or replicas < 1:
        raise ParameterError(f"simulate_ctbp: t_end={t_end}, replicas={replicas}")
    if not non_explosive(H):
        raise DomainError("simulate_ctbp", f"{H.label} fails the non-explosion test")
    times = np.array([t_end] if times is None else sorted(times), dtype=float)
    if times[0] < 0 or times[-1] > t_end:
        raise ParameterError("observation times must lie in [0, t_end]")
    if method == "auto":
        method = "marginal" if not math.isfinite(H.mean) else "events"
    if method not in ("events", "marginal"):
        raise ParameterError(f"unknown CTBP method '{method}'")
    log.info(f"CTBP {H.label}: {replicas} replicas to t={t_end:g} ({method})")

    def work(index, start, stop):
        rng = stream(seed, "ctbp", replica=index, role=method)
        if method == "events":
            observed, overflow = _events_block(H, times, stop - start, rng, event_cap)
            return observed, overflow, None
        return _marginal_block(H, times, stop - start, rng)

    parts = _run_blocks(work, replicas, threads)
    overflow = np.concatenate([part[1] for part in parts])
    if overflow.any():
        log.warning(f"CTBP {H.label}: {int(overflow.sum())} replicas hit the event or population cap")
    logs = None if parts[0][2] is None else np.concatenate([part[2] for part in parts])
    return CtbpResult(
        times=times,
        populations=np.concatenate([part[0] for part in parts]),
        overflow=overflow,
        method=method,
        log_populations=logs,
    )


def _exp_cdf(x):
    return 1.0 - np.exp(-np.maximum(x, 0.0))


def _exp_transform(u):
    return 1.0 / (1.0 + np.asarray(u, dtype=float))


def ctbp_limit_check(H: GeneratingDistribution, t_end: float, replicas: int, seed: int, u_grid=None) -> TwoSampleStat:
    """
    Compare e^{-(c-1)t} N(t) against the limit law of the process.

    Binary splitting compares by KS against Exp(1); other finite-mean broods
    compare empirical and limit Laplace transforms. The Neveu process has an
    infinite mean; there e^{-t} ln N(t) is compared against Exp(1).
    """
    u_grid = np.linspace(0.0, 5.0, 51) if u_grid is None else np.asarray(u_grid, dtype=float)
    result = simulate_ctbp(H, t_end, replicas, seed)
    if not math.isfinite(H.mean):
        if H.name != "neveu":
            raise UnsupportedError(f"no limit law known for the infinite-mean process {H.label}")
        samples = math.exp(-t_end) * result.final_log
        return one_sample(samples, cdf=_exp_cdf, transform=_exp_transform, u_grid=u_grid, kind="laplace")
    samples = math.exp(-H.growth_rate * t_end) * result.final
    if H.name == "yule":
        return one_sample(samples, cdf=_exp_cdf, transform=_exp_transform, u_grid=u_grid, kind="laplace")
    limit = shifted_ml_transform() if H.name == "shifted-geom" else ct_limit_transform(H)
    return one_sample(samples, transform=limit, u_grid=u_grid, kind="laplace")


# --- weak limits ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeakLimitReport:
    """Transform gaps of normalised random and deterministic sums along a sequence of scales."""

    c_values: List[float]
    random_gaps: List[float]
    fixed_gaps: List[float]
    threshold: float
    kind: str

    @staticmethod
    def _monotone(gaps: Sequence[float]) -> bool:
        return all(later <= earlier for earlier, later in zip(gaps, gaps[1:]))

    @property
    def fixed_monotone(self) -> bool:
        return self._monotone(self.fixed_gaps)

    def to_dict(self) -> dict:
        return {
            "c_values": list(self.c_values),
            "random_gaps": list(self.random_gaps),
            "fixed_gaps": list(self.fixed_gaps),
            "threshold": self.threshold,
            "kind": self.kind,
        }


def _exponent_targets(L: LaplaceSpec, exp: StableExponent, kind: str):
    if kind == "chf":
        return (
            lambda u: evaluate_f(L, exp, u),
            lambda u: np.exp(-(exp.beta + 1j * exp.gamma * np.sign(u)) * np.abs(u) ** exp.alpha),
        )
    scaled = lambda u: exp.beta * np.asarray(u, dtype=float) ** exp.alpha  # noqa: E731
    return (lambda u: L(scaled(u)), lambda u: np.exp(-scaled(u)))


def weak_limit_equivalence(
    U_sampler,
    L: LaplaceSpec,
    c_sequence: Sequence[float],
    a: Callable[[float], float],
    seed: int,
    exponent: StableExponent = StableExponent(1.0, 1.0, 0.0),
    counting: Callable[[float], PgfFamily] = lambda c: geometric(1.0 / c),
    n: int = 10_000,
    u_grid=None,
) -> WeakLimitReport:
    """
    Gaps of (U_1 + ... + U_{N_c})/a(c) to the mixture transform L(g(u)) and
    of (U_1 + ... + U_[c])/a(c) to the strictly stable factor e^{-g(u)}.

    Nonnegative summands are compared through Laplace transforms, where g is
    read as beta u^alpha; signed summands through characteristic functions.
    """
    summands = as_summand_law(U_sampler)
    kind = summands.kind
    mixture, factor = _exponent_targets(L, exp=exponent, kind=kind)
    random_gaps, fixed_gaps = [], []
    for index, c in enumerate(c_sequence):
        scale = a(c)
        counts = OffspringLaw(counting(c)).sample(n, stream(seed, "weak-limit", replica=index, role="N"))
        random_sums = summands.sums(counts, stream(seed, "weak-limit", replica=index, role="random")) / scale
        fixed = np.full(n, int(math.floor(c)), dtype=np.int64)
        fixed_sums = summands.sums(fixed, stream(seed, "weak-limit", replica=index, role="fixed")) / scale
        random_gaps.append(transform_gap(random_sums, mixture, u_grid, kind))
        fixed_gaps.append(transform_gap(fixed_sums, factor, u_grid, kind))
        log.info(f"weak limit c={c:g}: random gap {random_gaps[-1]:.4g}, fixed gap {fixed_gaps[-1]:.4g}")
    return WeakLimitReport(
        c_values=[float(c) for c in c_sequence],
        random_gaps=random_gaps,
        fixed_gaps=fixed_gaps,
        threshold=gap_threshold(n),
        kind=kind,
    )


# --- reports -------------------------------------------------------------------------------


@dataclass
class SimReport:
    """One verdict of an experiment; runtime_ms is excluded from determinism digests."""

    statistic_name: str
    value: float
    threshold: float
    verdict: str
    n: int
    seed: int
    runtime_ms: int = 0
    experiment: str = ""
    details: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "statistic_name": self.statistic_name,
            "value": self.value,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "n": self.n,
            "seed": self.seed,
            "runtime_ms": self.runtime_ms,
            "details": self.details,
        }


class Stopwatch:
    """Milliseconds elapsed since construction."""

    def __init__(self):
        self._start = time.perf_counter()

    @property
    def elapsed_ms(self) -> int:
        return int(round(1000.0 * (time.perf_counter() - self._start)))
