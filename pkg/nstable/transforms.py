#!/usr/bin/env python3
"""
Laplace transform laboratory.

Numeric inversion of strictly decreasing Laplace transforms, the map
c -> L(c L^{-1}(s)) that turns a standard law into candidate counting PGFs,
residuals of the functional equation phi(L(u)) = L(cu), PGF-ness tests of
mapped functions, semigroup scans over grids of scales, commutation
checks, and the inverse transform of continuous-time branching limits.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, ParameterError
from .families import (
    GeneratingDistribution,
    PgfFamily,
    chebyshev_hitting,
    extinction_probability,
    geometric,
    geometric_H_ctbp,
    identity_pgf,
    negative_binomial_kM,
)
from .series import (
    DEFAULT_ORDER,
    MEAN_ORDER,
    PGF_TOLERANCE,
    MeanEstimate,
    PgfVerdict,
    TruncatedSeries,
    check_pgf,
    iterate,
    monomial_series,
    pgf_mean,
)

log = logging.getLogger(__name__)

ATOM_MARGIN = 1e-14
EXPONENT_TOLERANCE = 0.02
NEXT_EXPONENT_TOLERANCE = 0.05
PROBE_DEPTH = 12
PROBE_POINTS = 129
PROBE_STRIDES = (1, 2, 4, 8)
QUAD_TOLERANCE = 1e-10

SeriesHint = Callable[[float, int], Optional[TruncatedSeries]]


@dataclass(frozen=True, eq=False)
class LaplaceSpec:
    """Laplace transform of a law on [0, inf): L(0) = 1, strictly decreasing to the atom."""

    name: str
    evaluate: Callable
    deriv_at_0: float = -1.0
    atom: float = 0.0
    u_max: float = 1e300
    complex_eval: Optional[Callable] = None
    series_hint: Optional[SeriesHint] = None
    precision: float = 1e-15
    params: Dict[str, float] = field(default_factory=dict)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore", under="ignore"):
            value = self.evaluate(u)
        return float(value) if np.ndim(value) == 0 else value


def _integer(value: float, tolerance: float = 1e-9) -> Optional[int]:
    nearest = round(value)
    return int(nearest) if abs(value - nearest) <= tolerance * max(1.0, abs(value)) else None


# --- catalogued transforms -----------------------------------------------------------------


def exponential_transform() -> LaplaceSpec:
    """1/(1+u), the standard law of the geometric semigroup."""
    return LaplaceSpec(
        name="exponential",
        evaluate=lambda u: 1.0 / (1.0 + u),
        complex_eval=lambda z: 1.0 / (1.0 + z),
        series_hint=lambda c, order: geometric(1.0 / c).series(order),
    )


def delta_transform() -> LaplaceSpec:
    """e^{-u}: the unit mass at 1, stable under deterministic counting."""

    def hint(c, order):
        k = _integer(c)
        return monomial_series(k, order) if k is not None and k <= order else None

    return LaplaceSpec(
        name="delta1",
        evaluate=lambda u: np.exp(-u),
        complex_eval=lambda z: np.exp(-z),
        series_hint=hint,
    )


def _sech_sqrt(z):
    root = np.sqrt(2.0 * z)
    decay = np.exp(-root)
    return 2.0 * decay / (1.0 + decay * decay)


def cosh_transform() -> LaplaceSpec:
    """1/cosh(sqrt(2u)): exit time of Brownian motion from (-1, 1)."""

    def hint(c, order):
        n = _integer(math.sqrt(c))
        return chebyshev_hitting(n).series(order) if n is not None else None

    return LaplaceSpec(
        name="cosh",
        evaluate=_sech_sqrt,
        complex_eval=lambda z: _sech_sqrt(np.asarray(z, dtype=complex)),
        series_hint=hint,
    )


def gamma_transform(shape: float, rate: Optional[float] = None) -> LaplaceSpec:
    """(1 + u/rate)^{-shape}; rate defaults to shape (mean one)."""
    if shape <= 0:
        raise ParameterError(f"gamma: shape={shape} must be positive")
    rate = shape if rate is None else rate
    if rate <= 0:
        raise ParameterError(f"gamma: rate={rate} must be positive")

    def hint(c, order):
        k = _integer(1.0 / shape)
        if k is None:
            return None
        if c == 1:
            return identity_pgf().series(order)
        return negative_binomial_kM(1.0 / c, k).series(order)

    return LaplaceSpec(
        name="gamma",
        evaluate=lambda u: (1.0 + u / rate) ** (-shape),
        deriv_at_0=-shape / rate,
        complex_eval=lambda z: np.power(1.0 + np.asarray(z, dtype=complex) / rate, -shape),
        series_hint=hint,
        params={"shape": shape, "rate": rate},
    )


def shifted_ml_transform() -> LaplaceSpec:
    """2/(1 + sqrt(1 + 4u)), limit law of the process with shifted-geometric broods."""
    return LaplaceSpec(
        name="shifted-ml",
        evaluate=lambda u: 2.0 / (1.0 + np.sqrt(1.0 + 4.0 * u)),
        complex_eval=lambda z: 2.0 / (1.0 + np.sqrt(1.0 + 4.0 * np.asarray(z, dtype=complex))),
        series_hint=lambda c, order: geometric_H_ctbp(0.5 * math.log(c)).series(order),
    )


def mittag_leffler_transform(alpha: float, beta: float = 1.0) -> LaplaceSpec:
    """1/(1 + beta u^alpha); infinite mean for alpha < 1."""
    if not 0 < alpha <= 1 or beta <= 0:
        raise ParameterError(f"mittag-leffler: alpha={alpha}, beta={beta} outside range")
    return LaplaceSpec(
        name="mittag-leffler",
        evaluate=lambda u: 1.0 / (1.0 + beta * u**alpha),
        deriv_at_0=-beta if alpha == 1 else -math.inf,
        complex_eval=lambda z: 1.0 / (1.0 + beta * np.power(np.asarray(z, dtype=complex), alpha)),
        params={"alpha": alpha, "beta": beta},
    )


def bgw_limit_transform(family: PgfFamily, seed_argument: float = 1e-5) -> LaplaceSpec:
    """
    Transform of the mean-one limit W of a supercritical BGW process with offspring PGF phi.

    Evaluated through L(u) = phi_k(L(u / m^k)) with the second-order seed
    L(v) = 1 - v + E[W^2] v^2 / 2 once u / m^k < seed_argument.
    """
    m = family.mean
    if not 1.0 < m < math.inf:
        raise ParameterError(f"bgw limit needs a finite offspring mean above one, got {m}")
    series = family.series(MEAN_ORDER)
    factorial = float(np.dot(np.arange(series.coeffs.size) * (np.arange(series.coeffs.size) - 1.0), series.coeffs))
    variance = factorial + m - m * m
    second_moment = 1.0 + variance / (m * m - m)

    def evaluate(u):
        u = np.asarray(u, dtype=float)
        top = max(float(np.max(u, initial=0.0)), seed_argument)
        steps = max(0, math.ceil(math.log(top / seed_argument) / math.log(m)))
        v = u / m**steps
        value = 1.0 - v + 0.5 * second_moment * v * v
        for _ in range(steps):
            value = family(value)
        return value

    def hint(c, order):
        k = _integer(math.log(c) / math.log(m))
        return iterate(family.series(order), k) if k is not None and k >= 0 else None

    return LaplaceSpec(
        name=f"bgw-limit[{family.label}]",
        evaluate=evaluate,
        atom=extinction_probability(family),
        series_hint=hint,
        precision=1e-9,
    )


# --- inversion and the scale map -----------------------------------------------------------


def _invert(L: LaplaceSpec, s: float) -> float:
    if s > 1.0 + 1e-12 or not np.isfinite(s):
        raise DomainError("laplace_inverse", f"s={s} above 1")
    if s >= 1.0:
        return 0.0
    if s <= L.atom + ATOM_MARGIN:
        raise DomainError("laplace_inverse", f"s={s} at or below the atom {L.atom} of {L.name}")
    lo, hi = 0.0, 1.0
    while L(hi) > s:
        lo, hi = hi, 2.0 * hi
        if hi > L.u_max:
            raise DomainError("laplace_inverse", f"no bracket for s={s} below u_max={L.u_max:g}")
    if L(hi) == s:
        return hi
    return optimize.brentq(
        lambda u: L(u) - s, lo, hi, xtol=np.finfo(float).tiny, rtol=4 * np.finfo(float).eps, maxiter=500
    )


def laplace_inverse(L: LaplaceSpec, s):
    """u >= 0 with L(u) = s, for s in (atom, 1]; scalar or array."""
    values = np.asarray(s, dtype=float)
    if values.ndim == 0:
        return _invert(L, float(values))
    return np.array([_invert(L, float(v)) for v in values.ravel()]).reshape(values.shape)


class BungeMap:
    """s -> L(c L^{-1}(s)) on [0, 1], extended by the atom below the atom."""

    def __init__(self, L: LaplaceSpec, c: float):
        if c < 1:
            raise ParameterError(f"scale c={c} must be at least 1")
        self.L = L
        self.c = float(c)

    def __repr__(self):
        return f"BungeMap({self.L.name}, c={self.c:g})"

    def __call__(self, s):
        values = np.asarray(s, dtype=float)
        if self.c == 1.0:
            return float(values) if values.ndim == 0 else values.copy()
        flat = values.ravel()
        out = np.empty_like(flat)
        below = flat <= self.L.atom + ATOM_MARGIN
        top = flat >= 1.0
        middle = ~below & ~top
        out[below] = self.L.atom
        out[top] = 1.0
        if np.any(middle):
            out[middle] = self.L(self.c * laplace_inverse(self.L, flat[middle]))
        out = out.reshape(values.shape)
        return float(out) if values.ndim == 0 else out


def bunge_map(L: LaplaceSpec, c: float) -> BungeMap:
    return BungeMap(L, c)


# --- PGF-ness of mapped functions ----------------------------------------------------------


def _exponent_test(phi: Callable, c: float) -> Optional[PgfVerdict]:
    """Reject when phi(s) ~ K s^rho with rho, or the first correction exponent, non-integer."""
    s = np.geomspace(1e-6, 1e-3, 25)
    y = phi(s)
    positive = y > 0
    if positive.sum() < 5:
        return None
    slope = float(np.polyfit(np.log(s[positive]), np.log(y[positive]), 1)[0])
    rho = round(slope)
    if abs(slope - rho) > EXPONENT_TOLERANCE:
        return PgfVerdict(
            is_pgf=False,
            first_bad_index=int(math.ceil(slope)),
            worst_violation=-abs(slope - rho),
            tolerance_used=EXPONENT_TOLERANCE,
            method="exponent",
            detail=f"c={c:g}: phi(s) ~ s^{slope:.4f} near 0",
        )

    s = np.geomspace(1e-4, 1e-2, 21)
    w = phi(s) / s**rho
    increments = np.abs(w - phi(s / 2) / (s / 2) ** rho)
    scale = float(np.abs(w).max())
    informative = increments > 1e-13 * scale
    if increments.max() <= 1e-10 * scale or informative.sum() < 5:
        return None
    delta = float(np.polyfit(np.log(s[informative]), np.log(increments[informative]), 1)[0])
    if abs(delta - round(delta)) > NEXT_EXPONENT_TOLERANCE or round(delta) < 1:
        return PgfVerdict(
            is_pgf=False,
            first_bad_index=rho + int(math.ceil(delta)),
            worst_violation=-abs(delta - round(delta)),
            tolerance_used=NEXT_EXPONENT_TOLERANCE,
            method="exponent",
            detail=f"c={c:g}: phi(s) ~ K s^{rho} (1 + A s^{delta:.4f}) near 0",
        )
    return None


def _monotonicity_probes(phi: Callable, precision: float, depth: int) -> PgfVerdict:
    """Forward differences of every order up to depth must be nonnegative on [0, 1]."""
    y = phi(np.linspace(0.0, 1.0, PROBE_POINTS))
    base = max(precision, 1e-12)
    worst = 0.0
    for k in range(1, depth + 1):
        tolerance = base * 2.0**k
        for stride in PROBE_STRIDES:
            differences = np.diff(y[::stride], n=k)
            if differences.size == 0:
                continue
            lowest = float(differences.min())
            worst = min(worst, lowest)
            if lowest < -tolerance:
                return PgfVerdict(
                    is_pgf=False,
                    first_bad_index=k,
                    worst_violation=lowest,
                    tolerance_used=tolerance,
                    method="probe",
                    detail=f"order-{k} difference {lowest:.3e} at stride {stride}",
                )
    return PgfVerdict(
        is_pgf=True,
        first_bad_index=None,
        worst_violation=worst,
        tolerance_used=base * 2.0**depth,
        method="exponent+probe",
    )


def pgfness_of_map(L: LaplaceSpec, c: float, order: int = DEFAULT_ORDER, depth: int = PROBE_DEPTH) -> PgfVerdict:
    """
    Decide whether s -> L(c L^{-1}(s)) is a PGF.

    Uses the exact series when the transform provides one for this c,
    otherwise the small-s exponent test followed by absolute-monotonicity
    probes.
    """
    if c < 1:
        raise ParameterError(f"scale c={c} must be at least 1")
    if L.series_hint is not None:
        series = L.series_hint(c, order)
        if series is not None:
            return replace(check_pgf(series, PGF_TOLERANCE), method="series-hint")
    phi = bunge_map(L, c)
    rejection = _exponent_test(phi, c)
    if rejection is not None:
        log.debug(f"{L.name}: {rejection.detail}")
        return rejection
    return _monotonicity_probes(phi, L.precision, depth)


def poincare_residual(phi: Callable, L: LaplaceSpec, c: float, u_grid) -> float:
    """sup over the grid of |phi(L(u)) - L(cu)|."""
    u = np.asarray(u_grid, dtype=float)
    return float(np.max(np.abs(phi(L(u)) - L(c * u))))


def commute_check(phi: Callable, psi: Callable, s_grid) -> float:
    """sup over the grid of |phi(psi(s)) - psi(phi(s))|."""
    s = np.asarray(s_grid, dtype=float)
    return float(np.max(np.abs(phi(psi(s)) - psi(phi(s)))))


# --- semigroup scans -----------------------------------------------------------------------


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def _same_set(left: Sequence[float], right: Sequence[float]) -> bool:
    left, right = sorted(left), sorted(right)
    return len(left) == len(right) and all(_close(a, b) for a, b in zip(left, right))


def classify_scan(c_grid: Sequence[float], accepted: Sequence[float]) -> str:
    """Match the accepted scales against the semigroup templates; ambiguity is Unclassified."""
    grid = [float(c) for c in c_grid]
    templates = {
        "Trivial": [c for c in grid if _close(c, 1.0)],
        "Naturals": [c for c in grid if _integer(c) is not None],
        "Squares": [c for c in grid if c >= 1 and _integer(math.sqrt(c)) is not None],
        "FullInterval": grid,
    }
    nontrivial = [c for c in accepted if c > 1.0 and not _close(c, 1.0)]
    if nontrivial:
        a = min(nontrivial)
        templates[f"Cyclic({a:g})"] = [
            c for c in grid if c >= 1 and _integer(math.log(c) / math.log(a)) is not None
        ]
    matches = [name for name, members in templates.items() if _same_set(members, accepted)]
    if len(matches) == 1:
        return matches[0]
    if matches:
        log.debug(f"ambiguous classification on this grid: {matches}")
    return "Unclassified"


@dataclass(frozen=True)
class ScanResult:
    transform: str
    c_grid: List[float]
    verdicts: List[PgfVerdict]
    accepted: List[float]
    classification: str

    def closure_violations(self) -> List[tuple]:
        """Pairs of accepted scales whose product lies on the grid but was rejected."""
        violations = []
        for i, a in enumerate(self.accepted):
            for b in self.accepted[i:]:
                product = a * b
                on_grid = any(_close(product, c) for c in self.c_grid)
                if on_grid and not any(_close(product, c) for c in self.accepted):
                    violations.append((a, b))
        return violations

    def to_dict(self) -> dict:
        return {
            "transform": self.transform,
            "c_grid": list(self.c_grid),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "accepted": list(self.accepted),
            "classification": self.classification,
        }


def semigroup_scan(
    L: LaplaceSpec, c_grid: Iterable[float], order: int = DEFAULT_ORDER, threads: Optional[int] = None
) -> ScanResult:
    grid = [float(c) for c in c_grid]
    if any(c < 1 for c in grid):
        raise ParameterError(f"scan grid must lie in [1, inf): {grid}")
    with ThreadPoolExecutor(max_workers=max(1, threads or 1)) as pool:
        verdicts = list(pool.map(lambda c: pgfness_of_map(L, c, order), grid))
    accepted = [c for c, verdict in zip(grid, verdicts) if verdict.is_pgf]
    classification = classify_scan(grid, accepted)
    log.info(f"scan {L.name}: accepted {accepted} of {len(grid)} scales, {classification}")
    return ScanResult(L.name, grid, verdicts, accepted, classification)


def scaling_limit_check(L: LaplaceSpec, c_sequence: Iterable[float], u_grid=None) -> float:
    """sup_u |phi_c(e^{-u/c}) - L(u)| for the largest c of the sequence."""
    c = max(float(value) for value in c_sequence)
    u = np.linspace(0.0, 5.0, 51) if u_grid is None else np.asarray(u_grid, dtype=float)
    phi = bunge_map(L, c)
    return float(np.max(np.abs(phi(np.exp(-u / c)) - L(u))))


def moment_spot_check(L: LaplaceSpec, c: float, order: int = MEAN_ORDER) -> MeanEstimate:
    """Mean of the mapped PGF; equals c when the standard law has a finite mean."""
    series = L.series_hint(c, order) if L.series_hint is not None else None
    if series is None:
        raise ParameterError(f"{L.name} has no exact series at c={c:g}")
    return pgf_mean(series)


def laplace_mean_limit(L: LaplaceSpec, u_sequence=None) -> float:
    """Extrapolated limit of (1 - L(u))/u as u decreases to 0."""
    u = np.geomspace(1e-2, 1e-5, 8) if u_sequence is None else np.asarray(u_sequence, dtype=float)
    if np.any(u <= 0) or np.any(np.diff(u) >= 0):
        raise ParameterError("u_sequence must be positive and strictly decreasing")
    ratios = (1.0 - L(u)) / u
    coefficients = np.polynomial.polynomial.polyfit(u, ratios, min(2, u.size - 1))
    return float(coefficients[0])


# --- continuous-time branching limits ------------------------------------------------------


def ct_laplace_inverse(H: GeneratingDistribution, s: float) -> float:
    """
    L^{-1}(s) for the mean-one limit of the process driven by H.

    ln L^{-1}(s) = ln(1-s) - int_{v_s}^inf [1 + (c-1)/drift(e^{-v})] dv,
    v_s = -ln(1-s), which is the logarithmic integral of the backward
    equation normalised so that L^{-1}(s) ~ 1 - s at s = 1.
    """
    growth = H.growth_rate
    if not 0 < growth < math.inf:
        raise DomainError("ct_laplace_inverse", f"{H.label} is not supercritical with finite mean")
    if s >= 1.0:
        return 0.0
    extinction = H.extinction_probability()
    if s <= extinction:
        raise DomainError("ct_laplace_inverse", f"s={s} at or below the extinction probability {extinction:.6g}")
    start = -math.log1p(-s)

    def integrand(v):
        return 1.0 + growth / H.drift(math.exp(-v))

    correction, _ = integrate.quad(integrand, start, math.inf, epsabs=QUAD_TOLERANCE, epsrel=QUAD_TOLERANCE, limit=200)
    return math.exp(-start - correction)


def ct_limit_transform(H: GeneratingDistribution) -> LaplaceSpec:
    """Limit transform of the process driven by H, evaluated by inverting ct_laplace_inverse."""
    extinction = H.extinction_probability()

    def evaluate_scalar(u):
        if u <= 0:
            return 1.0
        return optimize.brentq(
            lambda s: ct_laplace_inverse(H, s) - u, extinction + 1e-12, 1.0 - 1e-15, xtol=1e-15
        )

    def evaluate(u):
        values = np.asarray(u, dtype=float)
        return np.array([evaluate_scalar(float(v)) for v in values.ravel()]).reshape(values.shape)

    return LaplaceSpec(
        name=f"ctbp-limit[{H.label}]",
        evaluate=evaluate,
        atom=extinction,
        precision=1e-10,
    )


def non_explosive(H: GeneratingDistribution, threshold: float = 0.3) -> bool:
    """
    Numerical check that int_{1/2}^{1} du / (u - h(u)) diverges.

    With v = -ln(1-u) the integrand is -1/drift(e^{-v}); the check compares
    the integral up to 1 - 1e-12 against the one up to 1 - 1e-6.
    """

    def integral(eps):
        value, _ = integrate.quad(lambda v: -1.0 / H.drift(math.exp(-v)), math.log(2.0), -math.log(eps), limit=200)
        return value

    return integral(1e-12) - integral(1e-6) > threshold
