#!/usr/bin/env python3
"""
Truncated power series at 0.

TruncatedSeries is the workhorse of the PGF algebra: composition,
iteration, coefficient extraction for named families and the
nonnegativity / normalization check that decides whether a series is a
probability generating function.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError, UnsupportedError

log = logging.getLogger(__name__)

DEFAULT_ORDER = 64
MEAN_ORDER = 512
PGF_TOLERANCE = 1e-9
TAIL_TOLERANCE = 1e-6

Number = Union[int, float]


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Coefficients c_0..c_M of an analytic function at 0, truncated at s^M."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if coeffs.size < 2:
            raise ValueError("a truncated series needs order >= 1")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def tail_mass(self) -> float:
        """1 - sum of coefficients; the probability mass beyond the truncation."""
        return float(1.0 - self.coeffs.sum())

    def truncate(self, order: int) -> "TruncatedSeries":
        if order > self.order:
            raise ValueError(f"cannot extend order {self.order} to {order}")
        return TruncatedSeries(self.coeffs[: order + 1])

    def allclose(self, other: "TruncatedSeries", rtol: float = 1e-12, atol: float = 1e-15) -> bool:
        order = min(self.order, other.order)
        return bool(np.allclose(self.coeffs[: order + 1], other.coeffs[: order + 1], rtol=rtol, atol=atol))

    def __call__(self, s):
        """Evaluate the truncated polynomial at s (scalar or array)."""
        return np.polynomial.polynomial.polyval(s, self.coeffs)

    def _aligned(self, other: "TruncatedSeries"):
        order = min(self.order, other.order)
        return self.coeffs[: order + 1], other.coeffs[: order + 1], order

    def __add__(self, other):
        if isinstance(other, TruncatedSeries):
            a, b, _ = self._aligned(other)
            return TruncatedSeries(a + b)
        coeffs = self.coeffs.copy()
        coeffs[0] += other
        return TruncatedSeries(coeffs)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            a, b, order = self._aligned(other)
            return TruncatedSeries(np.convolve(a, b)[: order + 1])
        return TruncatedSeries(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries(self.coeffs / other)
        a, b, order = self._aligned(other)
        if b[0] == 0:
            raise DomainError("series division", "divisor has zero constant term")
        q = np.zeros(order + 1)
        q[0] = a[0] / b[0]
        for n in range(1, order + 1):
            q[n] = (a[n] - np.dot(b[1 : n + 1], q[n - 1 :: -1])) / b[0]
        return TruncatedSeries(q)

    def __rtruediv__(self, other):
        return constant_series(other, self.order) / self

    def sqrt(self) -> "TruncatedSeries":
        a = self.coeffs
        if a[0] <= 0:
            raise DomainError("series sqrt", "constant term must be positive")
        b = np.zeros_like(a)
        b[0] = np.sqrt(a[0])
        for n in range(1, a.size):
            b[n] = (a[n] - np.dot(b[1:n], b[n - 1 : 0 : -1])) / (2.0 * b[0])
        return TruncatedSeries(b)

    def power(self, exponent: float) -> "TruncatedSeries":
        """Real power of a series with positive constant term (J.C.P. Miller recurrence)."""
        a = self.coeffs
        if a[0] <= 0:
            raise DomainError("series power", "constant term must be positive")
        b = np.zeros_like(a)
        b[0] = a[0] ** exponent
        k = np.arange(1, a.size)
        for n in range(1, a.size):
            weights = (exponent + 1.0) * k[:n] - n
            b[n] = np.dot(weights * a[1 : n + 1], b[n - 1 :: -1]) / (n * a[0])
        return TruncatedSeries(b)

    def derivative(self) -> "TruncatedSeries":
        """Derivative series; loses one order of accuracy, padded with a zero."""
        coeffs = np.zeros_like(self.coeffs)
        coeffs[:-1] = self.coeffs[1:] * np.arange(1, self.coeffs.size)
        return TruncatedSeries(coeffs)


@dataclass(frozen=True)
class PgfVerdict:
    """Outcome of a PGF-ness test; failures are carried here, never raised."""

    is_pgf: bool
    first_bad_index: Optional[int]
    worst_violation: float
    tolerance_used: float
    method: str = "series"
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "is_pgf": self.is_pgf,
            "first_bad_index": self.first_bad_index,
            "worst_violation": self.worst_violation,
            "tolerance_used": self.tolerance_used,
            "method": self.method,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class MeanEstimate:
    """Mean of a truncated PGF series; a lower bound when the tail mass is not negligible."""

    value: float
    is_lower_bound: bool
    tail_mass: float

    def __float__(self):
        return self.value


def constant_series(value: Number, order: int) -> TruncatedSeries:
    coeffs = np.zeros(order + 1)
    coeffs[0] = value
    return TruncatedSeries(coeffs)


def monomial_series(power: int, order: int, scale: float = 1.0) -> TruncatedSeries:
    coeffs = np.zeros(order + 1)
    if power <= order:
        coeffs[power] = scale
    return TruncatedSeries(coeffs)


def identity_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    return monomial_series(1, order)


def from_coefficients(values: Sequence[float], order: Optional[int] = None) -> TruncatedSeries:
    """Build a series from leading coefficients, zero padded up to order."""
    values = np.asarray(values, dtype=float)
    order = max(values.size - 1, 1) if order is None else order
    coeffs = np.zeros(order + 1)
    size = min(values.size, order + 1)
    coeffs[:size] = values[:size]
    return TruncatedSeries(coeffs)


def compose(outer: TruncatedSeries, inner: TruncatedSeries) -> TruncatedSeries:
    """
    Series of outer(inner(s)) by Horner substitution.

    The inner constant term must lie in [0, 1); with a zero constant term the
    result is exact up to the shared truncation order.
    """
    c0 = inner.coeffs[0]
    if not 0.0 <= c0 < 1.0:
        raise DomainError("compose", f"inner constant term {c0} outside [0, 1)")
    order = min(outer.order, inner.order)
    inner = inner.truncate(order)
    f = outer.coeffs
    result = constant_series(f[order], order)
    for k in range(order - 1, -1, -1):
        result = result * inner + f[k]
    return result


def iterate(phi: TruncatedSeries, k: int) -> TruncatedSeries:
    """k-fold self composition; k = 0 gives the identity series."""
    if k < 0:
        raise ValueError(f"iteration count must be non-negative, got {k}")
    result = identity_series(phi.order)
    for _ in range(k):
        result = compose(phi, result)
    return result


def pgf_mean(phi: TruncatedSeries, tail_tolerance: float = TAIL_TOLERANCE) -> MeanEstimate:
    value = float(np.dot(np.arange(phi.coeffs.size), phi.coeffs))
    tail = phi.tail_mass
    return MeanEstimate(value=value, is_lower_bound=tail > tail_tolerance, tail_mass=tail)


def check_pgf(phi: TruncatedSeries, tolerance: float = PGF_TOLERANCE) -> PgfVerdict:
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    coeffs = phi.coeffs
    scale = max(1.0, float(np.abs(coeffs).max()))
    tolerance_used = tolerance * scale
    worst = float(coeffs.min())
    bad = np.flatnonzero(coeffs < -tolerance_used)
    first_bad = int(bad[0]) if bad.size else None
    normalized = float(coeffs.sum()) <= 1.0 + tolerance
    detail = "" if normalized else f"coefficient sum {coeffs.sum():.12g} exceeds 1"
    verdict = PgfVerdict(
        is_pgf=first_bad is None and normalized,
        first_bad_index=first_bad,
        worst_violation=worst,
        tolerance_used=tolerance_used,
        method="series",
        detail=detail,
    )
    if not verdict.is_pgf:
        log.debug(f"series rejected: first bad index {first_bad}, worst {worst:.3e} {detail}")
    return verdict


def series_of(family, order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """Series seed of a named family; families without one raise UnsupportedError."""
    if family.series_seed is None:
        raise UnsupportedError(
            f"family '{family.name}' has no closed series; extract coefficients through the transform lab"
        )
    return family.series_seed(order)
