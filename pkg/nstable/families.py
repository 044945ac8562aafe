#!/usr/bin/env python3
"""
Named probability generating functions and generating distributions.

Every counting law used by the toolkit is a PgfFamily: a vectorised
evaluator on [0, 1], its mean, an optional series seed, an optional
continuous semigroup parameterisation t -> member(t) (with p = e^{-t}),
and a sampler. Generating distributions H drive the continuous-time
branching processes; they carry h, the drift (h(x) - x)/(1 - x) as a
cancellation-free function of y = 1 - x, their mean h'(1) and the member map t -> N(t).
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import ParameterError, UnsupportedError
from .series import (
    TruncatedSeries,
    constant_series,
    from_coefficients,
    identity_series,
    monomial_series,
)

log = logging.getLogger(__name__)

Sampler = Callable[[int, np.random.Generator], np.ndarray]
SumSampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]

# tabulated inversion stops growing the series once the dropped tail is below this
TABLE_TAIL = 1e-12
TABLE_MAX_ORDER = 1 << 14
SIBUYA_TABLE = 100_000


@dataclass(frozen=True, eq=False)
class PgfFamily:
    """A named PGF with evaluator, mean and optional series seed, semigroup and sampler."""

    name: str
    params: Dict[str, float]
    evaluate: Callable
    mean: float
    series_seed: Optional[Callable[[int], TruncatedSeries]] = None
    semigroup: Optional[Callable[[float], "PgfFamily"]] = None
    sampler: Optional[Sampler] = None
    sum_sampler: Optional[SumSampler] = None
    log_sampler: Optional[Sampler] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = self.evaluate(s)
        return float(value) if np.ndim(value) == 0 else value

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        args = ",".join(f"{key}={value:g}" for key, value in self.params.items())
        return f"{self.name}:{args}"

    def member(self, t: float) -> "PgfFamily":
        if self.semigroup is None:
            raise UnsupportedError(f"family '{self.name}' has no semigroup parameterisation")
        return self.semigroup(t)

    def series(self, order: int) -> TruncatedSeries:
        if self.series_seed is None:
            raise UnsupportedError(f"family '{self.name}' has no closed series")
        return self.series_seed(order)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is not None:
            return self.sampler(n, rng)
        table = self._mass_table()
        return np.searchsorted(table, rng.random(n) * table[-1], side="right").astype(np.int64)

    def sample_log(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """ln N draws; finite even where N itself overflows a double."""
        if self.log_sampler is not None:
            return self.log_sampler(n, rng)
        with np.errstate(divide="ignore"):
            return np.log(self.sample(n, rng).astype(float))

    def _mass_table(self) -> np.ndarray:
        """Cumulative masses from the series seed, grown until the dropped tail is negligible."""
        if "cdf" in self._cache:
            return self._cache["cdf"]
        if self.series_seed is None:
            raise UnsupportedError(f"family '{self.name}' has neither a sampler nor a series seed")
        order = 256
        while True:
            series = self.series_seed(order)
            if series.tail_mass < TABLE_TAIL or order >= TABLE_MAX_ORDER:
                break
            order *= 4
        if series.tail_mass >= TABLE_TAIL:
            log.warning(f"{self.label}: tabulated sampler drops tail mass {series.tail_mass:.2e}")
        cdf = np.cumsum(np.clip(series.coeffs, 0.0, None))
        self._cache["cdf"] = cdf
        return cdf


@dataclass(frozen=True, eq=False)
class GeneratingDistribution:
    """Brood-size law H on {0, 2, 3, ...} of a unit-rate continuous-time branching process."""

    name: str
    params: Dict[str, float]
    h: Callable
    drift: Callable  # y -> (h(1 - y) - (1 - y))/y
    mean: float
    sampler: Sampler
    member: Callable[[float], PgfFamily]
    h_series: Optional[Callable[[int], TruncatedSeries]] = None

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = self.h(s)
        return float(value) if np.ndim(value) == 0 else value

    @property
    def growth_rate(self) -> float:
        """Malthusian rate h'(1) - 1 of the mean population."""
        return self.mean - 1.0

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        args = ",".join(f"{key}={value:g}" for key, value in self.params.items())
        return f"{self.name}:{args}"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.sampler(n, rng)

    def extinction_probability(self) -> float:
        return extinction_probability(self.h)


def _check_probability(name: str, p: float, low_open: bool = True, high_open: bool = False):
    low_ok = p > 0 if low_open else p >= 0
    high_ok = p < 1 if high_open else p <= 1
    if not (low_ok and high_ok):
        raise ParameterError(f"{name}: p={p} outside its range")


def extinction_probability(pgf: Callable, tolerance: float = 1e-15, max_iter: int = 100_000) -> float:
    """Smallest fixed point of phi(q) = q in [0, 1], by monotone iteration from 0."""
    q = 0.0
    for _ in range(max_iter):
        following = float(pgf(q))
        if abs(following - q) < tolerance:
            return following
        q = following
    log.debug(f"extinction iteration stopped after {max_iter} steps at q={q}")
    return q


# --- counting laws -------------------------------------------------------------------------


def identity_pgf() -> PgfFamily:
    return PgfFamily(
        name="identity",
        params={},
        evaluate=lambda s: s,
        mean=1.0,
        series_seed=identity_series,
        semigroup=lambda t: identity_pgf(),
        sampler=lambda n, rng: np.ones(n, dtype=np.int64),
        sum_sampler=lambda counts, rng: np.asarray(counts, dtype=np.int64),
    )


def constant_offspring(k: int) -> PgfFamily:
    """Deterministic brood size k."""
    if k < 0 or int(k) != k:
        raise ParameterError(f"constant: k={k} must be a non-negative integer")
    k = int(k)
    return PgfFamily(
        name="constant",
        params={"k": k},
        evaluate=lambda s: s**k,
        mean=float(k),
        series_seed=lambda order: monomial_series(k, order),
        sampler=lambda n, rng: np.full(n, k, dtype=np.int64),
        sum_sampler=lambda counts, rng: k * np.asarray(counts, dtype=np.int64),
    )


def finite_offspring(masses: Dict[int, float]) -> PgfFamily:
    """Offspring law with finite support {value: probability}."""
    support = np.array(sorted(masses), dtype=np.int64)
    probabilities = np.array([masses[int(k)] for k in support], dtype=float)
    if np.any(support < 0) or np.any(probabilities < 0) or abs(probabilities.sum() - 1.0) > 1e-12:
        raise ParameterError(f"finite: masses {masses} do not form a distribution")
    probabilities = probabilities / probabilities.sum()

    def evaluate(s):
        return sum(p * s ** int(k) for k, p in zip(support, probabilities))

    def series_seed(order):
        coeffs = np.zeros(order + 1)
        keep = support <= order
        coeffs[support[keep]] = probabilities[keep]
        return TruncatedSeries(coeffs)

    def sum_sampler(counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        return rng.multinomial(counts, probabilities) @ support

    return PgfFamily(
        name="finite",
        params={f"p{int(k)}": float(p) for k, p in zip(support, probabilities)},
        evaluate=evaluate,
        mean=float(support @ probabilities),
        series_seed=series_seed,
        sampler=lambda n, rng: rng.choice(support, size=n, p=probabilities),
        sum_sampler=sum_sampler,
    )


def geometric(p: float) -> PgfFamily:
    """Geometric law on {1, 2, ...}: P(N = n) = p(1-p)^(n-1), PGF ps/(1-(1-p)s)."""
    _check_probability("geometric", p)

    def series_seed(order):
        n = np.arange(order + 1)
        coeffs = np.where(n >= 1, p * (1.0 - p) ** np.maximum(n - 1, 0), 0.0)
        return TruncatedSeries(coeffs)

    def sum_sampler(counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        total = counts.copy()
        alive = counts > 0
        if p < 1.0:
            total[alive] += rng.negative_binomial(counts[alive], p)
        return total

    return PgfFamily(
        name="geometric",
        params={"p": p},
        evaluate=lambda s: p * s / (1.0 - (1.0 - p) * s),
        mean=1.0 / p,
        series_seed=series_seed,
        semigroup=lambda t: geometric(p * math.exp(-t)),
        sampler=lambda n, rng: rng.geometric(p, size=n).astype(np.int64),
        sum_sampler=sum_sampler,
    )


def negative_binomial_kM(p: float, k: int) -> PgfFamily:
    """
    Law of kM where M - 1/k is negative binomial with shape 1/k:
    phi(s) = p^(1/k) s / (1 - (1-p) s^k)^(1/k). k = 1 is geometric(p).
    """
    if not 0 < p < 1:
        raise ParameterError(f"negbin-kM: p={p} outside (0, 1)")
    if k < 1 or int(k) != k:
        raise ParameterError(f"negbin-kM: k={k} must be a positive integer")
    k = int(k)
    r = 1.0 / k

    def series_seed(order):
        coeffs = np.zeros(order + 1)
        weight = p**r
        j = 0
        while 1 + k * j <= order:
            coeffs[1 + k * j] = weight
            j += 1
            weight *= (r + j - 1) / j * (1.0 - p)
        return TruncatedSeries(coeffs)

    def sampler(n, rng):
        return 1 + k * rng.negative_binomial(r, p, size=n).astype(np.int64)

    def sum_sampler(counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        total = counts.copy()
        alive = counts > 0
        total[alive] += k * rng.negative_binomial(counts[alive] * r, p)
        return total

    return PgfFamily(
        name="negbin-kM",
        params={"p": p, "k": k},
        evaluate=lambda s: p**r * s / (1.0 - (1.0 - p) * s**k) ** r,
        mean=1.0 / p,
        series_seed=series_seed,
        semigroup=lambda t: negative_binomial_kM(p * math.exp(-t), k),
        sampler=sampler,
        sum_sampler=sum_sampler,
    )


@lru_cache(maxsize=32)
def _sibuya_survival(p: float) -> np.ndarray:
    survival = np.cumprod(1.0 - p / np.arange(1, SIBUYA_TABLE + 1))
    survival.setflags(write=False)
    return survival


def _sibuya_draws(p: float, n: int, rng: np.random.Generator):
    """
    (N, ln N) for N ~ Sibuya(p), by inversion of P(N > m) = prod_{j<=m} (1 - p/j).

    Draws beyond the tabulated range use the asymptotic survival
    m^(-p) / Gamma(1 - p); its relative error there is below 1/SIBUYA_TABLE.
    """
    survival = _sibuya_survival(p)
    u = rng.random(n)
    # N > m iff u < S(m); S is decreasing so count the m with S(m) > u
    index = SIBUYA_TABLE - np.searchsorted(survival[::-1], u, side="right")
    values = index + 1.0
    log_n = np.log(values)
    tail = index >= SIBUYA_TABLE
    if np.any(tail):
        log_n[tail] = -(np.log(u[tail]) + gammaln(1.0 - p)) / p
        with np.errstate(over="ignore"):
            values[tail] = np.floor(np.exp(log_n[tail]))
    return values, log_n


def sibuya(p: float) -> PgfFamily:
    """Sibuya law, PGF 1 - (1-s)^p; infinite mean."""
    if not 0 < p < 1:
        raise ParameterError(f"sibuya: p={p} outside (0, 1)")

    def series_seed(order):
        n = np.arange(1, order + 1)
        signed = np.cumprod((n - 1 - p) / n)  # coefficients of (1-s)^p for n >= 1
        return from_coefficients(np.concatenate([[0.0], -signed]), order)

    def sampler(n, rng):
        return _sibuya_draws(p, n, rng)[0]

    def log_sampler(n, rng):
        return _sibuya_draws(p, n, rng)[1]

    return PgfFamily(
        name="sibuya",
        params={"p": p},
        evaluate=lambda s: 1.0 - (1.0 - s) ** p,
        mean=math.inf,
        series_seed=series_seed,
        semigroup=lambda t: sibuya(p * math.exp(-t)),
        sampler=sampler,
        log_sampler=log_sampler,
    )


def _chebyshev_scaled(n: int, s, one, square):
    """s^n T_n(1/s) through U_{k+1} = 2 U_k - s^2 U_{k-1}, U_0 = U_1 = 1."""
    previous, current = one, one
    for _ in range(n - 1):
        previous, current = current, 2 * current - square * previous
    return current


def chebyshev_hitting(n: int) -> PgfFamily:
    """Exit time of simple random walk from (-n, n): PGF 1/T_n(1/s), mean n^2."""
    if n < 1 or int(n) != n:
        raise ParameterError(f"chebyshev-hitting: n={n} must be a positive integer")
    n = int(n)

    def evaluate(s):
        return s**n / _chebyshev_scaled(n, s, 1.0, s * s)

    def series_seed(order):
        s = identity_series(order)
        denominator = _chebyshev_scaled(n, s, constant_series(1.0, order), s * s)
        return monomial_series(n, order) / denominator

    sampler = None
    sum_sampler = None
    if n == 2:
        # tau_2 = 2G with G geometric(1/2)
        sampler = lambda size, rng: 2 * rng.geometric(0.5, size=size).astype(np.int64)

        def sum_sampler(counts, rng):
            counts = np.asarray(counts, dtype=np.int64)
            total = counts.copy()
            alive = counts > 0
            total[alive] += rng.negative_binomial(counts[alive], 0.5)
            return 2 * total

    return PgfFamily(
        name="chebyshev-hitting",
        params={"n": n},
        evaluate=evaluate,
        mean=float(n * n),
        series_seed=series_seed,
        sampler=sampler,
        sum_sampler=sum_sampler,
    )


def yule_member(t: float) -> PgfFamily:
    """Yule process marginal N(t): geometric(e^{-t})."""
    if t < 0:
        raise ParameterError(f"yule: t={t} must be non-negative")
    member = geometric(math.exp(-t))
    return _renamed(member, "yule", {"t": t}, lambda dt: yule_member(t + dt))


def neveu_member(t: float) -> PgfFamily:
    """Neveu process marginal N(t): Sibuya(e^{-t}); t = 0 is the identity."""
    if t < 0:
        raise ParameterError(f"neveu: t={t} must be non-negative")
    if t == 0:
        return _renamed(identity_pgf(), "neveu", {"t": 0.0}, neveu_member)
    return _renamed(sibuya(math.exp(-t)), "neveu", {"t": t}, lambda dt: neveu_member(t + dt))


def geometric_H_ctbp(t: float) -> PgfFamily:
    """
    Marginal PGF of the process with shifted-geometric broods,
    psi_t(s) = 2s / (s + sqrt(s^2 + 4(1-s)e^{2t})); mean e^{2t}.
    """
    if t < 0:
        raise ParameterError(f"geomH-ctbp: t={t} must be non-negative")
    growth = math.exp(2.0 * t)

    def evaluate(s):
        return 2.0 * s / (s + np.sqrt(s * s + 4.0 * (1.0 - s) * growth))

    def series_seed(order):
        s = identity_series(order)
        root = (s * s + (1.0 - s) * (4.0 * growth)).sqrt()
        return (2.0 * s) / (s + root)

    return PgfFamily(
        name="geomH-ctbp",
        params={"t": t},
        evaluate=evaluate,
        mean=growth,
        series_seed=series_seed,
        semigroup=lambda dt: geometric_H_ctbp(t + dt),
    )


def theta_member(p: float, theta: float, q: float) -> PgfFamily:
    """
    G_p(s) = 1 - [p(1-s)^{-theta} + (1-p)(1-q)^{-theta}]^{-1/theta}.

    For theta < 0 the member is defective (total mass below 1): the
    corresponding branching process explodes.
    """
    _check_probability("theta", p)
    if not (-1.0 <= theta <= 1.0) or theta == 0:
        raise ParameterError(f"theta: theta={theta} outside [-1, 1] minus 0")
    if not 0 <= q < 1:
        raise ParameterError(f"theta: q={q} outside [0, 1)")
    offset = (1.0 - p) * (1.0 - q) ** (-theta)

    def evaluate(s):
        bracket = p * (1.0 - s) ** (-theta) + offset
        return 1.0 - bracket ** (-1.0 / theta)

    def series_seed(order):
        complement = 1.0 - identity_series(order)
        bracket = complement.power(-theta) * p + offset
        return 1.0 - bracket.power(-1.0 / theta)

    return PgfFamily(
        name="theta",
        params={"p": p, "theta": theta, "q": q},
        evaluate=evaluate,
        mean=p ** (-1.0 / theta) if theta > 0 else math.inf,
        series_seed=series_seed,
        semigroup=lambda t: theta_member(p * math.exp(-t), theta, q),
    )


def theta_time_scale(theta: float, q: float) -> float:
    """kappa with N(t) ~ G_{exp(-kappa t)} for the unit-rate process with brood law theta_H."""
    normaliser = 1.0 + theta - (1.0 - q) ** theta
    return theta * (1.0 - q) ** theta / normaliser


def binary_split() -> PgfFamily:
    """phi(s) = (s + s^2)/2: one or two children with equal probability."""
    law = finite_offspring({1: 0.5, 2: 0.5})
    return _renamed(law, "binary-split", {}, None)


def shifted_geometric() -> PgfFamily:
    """phi(s) = s^2/(4 - 3s): two plus a geometric number of extra children; mean 5."""

    def series_seed(order):
        n = np.arange(order + 1)
        coeffs = np.where(n >= 2, 0.25 * 0.75 ** np.maximum(n - 2, 0), 0.0)
        return TruncatedSeries(coeffs)

    def sum_sampler(counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        total = 2 * counts
        alive = counts > 0
        total[alive] += rng.negative_binomial(counts[alive], 0.25)
        return total

    return PgfFamily(
        name="shifted-geometric",
        params={},
        evaluate=lambda s: s * s / (4.0 - 3.0 * s),
        mean=5.0,
        series_seed=series_seed,
        sampler=lambda n, rng: 1 + rng.geometric(0.25, size=n).astype(np.int64),
        sum_sampler=sum_sampler,
    )


def _renamed(family: PgfFamily, name: str, params: Dict[str, float], semigroup) -> PgfFamily:
    return PgfFamily(
        name=name,
        params=params,
        evaluate=family.evaluate,
        mean=family.mean,
        series_seed=family.series_seed,
        semigroup=semigroup if semigroup is not None else family.semigroup,
        sampler=family.sampler,
        sum_sampler=family.sum_sampler,
        log_sampler=family.log_sampler,
    )


# --- generating distributions --------------------------------------------------------------


def yule_H() -> GeneratingDistribution:
    """Binary splitting, h(s) = s^2."""
    return GeneratingDistribution(
        name="yule",
        params={},
        h=lambda s: s * s,
        drift=lambda y: -(1.0 - y),
        mean=2.0,
        sampler=lambda n, rng: np.full(n, 2, dtype=np.int64),
        member=yule_member,
        h_series=lambda order: monomial_series(2, order),
    )


def neveu_H() -> GeneratingDistribution:
    """
    h(s) = s + (1-s) ln(1-s), masses 1/(n(n-1)) for n >= 2.

    P(H >= n) = 1/(n-1), so H = 1 + floor(1/U) is an exact sampler.
    """

    def h(s):
        s = np.asarray(s, dtype=float)
        complement = 1.0 - s
        return s + np.where(complement > 0, complement * np.log(np.where(complement > 0, complement, 1.0)), 0.0)

    def h_series(order):
        n = np.arange(order + 1)
        coeffs = np.where(n >= 2, 1.0 / np.maximum(n * (n - 1), 1), 0.0)
        return TruncatedSeries(coeffs)

    def sampler(n, rng):
        u = 1.0 - rng.random(n)  # (0, 1]
        return 1 + np.floor(1.0 / u).astype(np.int64)

    return GeneratingDistribution(
        name="neveu",
        params={},
        h=h,
        drift=lambda y: np.log(y),
        mean=math.inf,
        sampler=sampler,
        member=neveu_member,
        h_series=h_series,
    )


def shifted_geom_H() -> GeneratingDistribution:
    """P(H = n) = 2^{1-n}, n >= 2; h(s) = s^2/(2-s), mean 3."""
    return GeneratingDistribution(
        name="shifted-geom",
        params={},
        h=lambda s: s * s / (2.0 - s),
        drift=lambda y: -2.0 * (1.0 - y) / (1.0 + y),
        mean=3.0,
        sampler=lambda n, rng: 1 + rng.geometric(0.5, size=n).astype(np.int64),
        member=geometric_H_ctbp,
        h_series=lambda order: from_coefficients(
            np.concatenate([[0.0, 0.0], 0.5 ** np.arange(1, order)]), order
        ),
    )


def theta_H(theta: float, q: float) -> GeneratingDistribution:
    """
    h(s) = s + [(1-s)^{1+theta} - (1-q)^theta (1-s)] / [1 + theta - (1-q)^theta].

    theta in (-1, 1] minus 0, q in [0, 1). theta = 1 is binary splitting with
    death probability q/(1+q); theta < 0 has infinite mean and explodes.
    """
    if not (-1.0 < theta <= 1.0) or theta == 0:
        raise ParameterError(f"theta-H: theta={theta} outside (-1, 1] minus 0")
    if not 0 <= q < 1:
        raise ParameterError(f"theta-H: q={q} outside [0, 1)")
    base = (1.0 - q) ** theta
    normaliser = 1.0 + theta - base
    kappa = theta_time_scale(theta, q)

    def h(s):
        complement = 1.0 - np.asarray(s, dtype=float)
        return 1.0 - complement + (complement ** (1.0 + theta) - base * complement) / normaliser

    def h_series(order):
        s = identity_series(order)
        complement = 1.0 - s
        return s + (complement.power(1.0 + theta) - complement * base) / normaliser

    family = PgfFamily(
        name="theta-H",
        params={"theta": theta, "q": q},
        evaluate=h,
        mean=1.0 + base / normaliser if theta > 0 else math.inf,
        series_seed=h_series,
    )

    return GeneratingDistribution(
        name="theta",
        params={"theta": theta, "q": q},
        h=h,
        drift=lambda y: (y**theta - base) / normaliser,
        mean=family.mean,
        sampler=family.sample,
        member=lambda t: theta_member(math.exp(-kappa * t), theta, q),
        h_series=h_series,
    )


def backward_solution(H: GeneratingDistribution, t: float, s) -> np.ndarray:
    """
    F(t, s) from dF/dt = h(F) - F, F(0, s) = s, integrated numerically.

    Independent of the closed-form members; used to check them.
    """
    if t < 0:
        raise ParameterError(f"backward_solution: t={t} must be non-negative")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if t == 0:
        return s.copy()
    solution = integrate.solve_ivp(
        lambda _, f: H(np.clip(f, 0.0, 1.0)) - f,
        (0.0, t),
        s,
        method="DOP853",
        rtol=1e-11,
        atol=1e-13,
        vectorized=False,
    )
    if not solution.success:
        log.warning(f"backward equation for {H.label} stopped early: {solution.message}")
    return solution.y[:, -1]
