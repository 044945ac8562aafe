#!/usr/bin/env python3
"""
Strictly stable exponents and the closed-form random-stable laws.

A strictly stable law has characteristic function E[e^{iuZ}] = e^{-g(u)}
with g(u) = (beta + i gamma sgn u)|u|^alpha. Mixing its scale with a
nonnegative Y gives X = Y^{1/alpha} Z, whose characteristic function is
L(g(u)) when L is the Laplace transform of Y; the Linnik, Laplace,
Mittag-Leffler and Gaussian-mixture laws are all of that form.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy.special import erfcx

from .errors import DomainError, ParameterError, UnsupportedError
from .rng import as_generator, stream
from .transforms import (
    LaplaceSpec,
    exponential_transform,
    gamma_transform,
    mittag_leffler_transform,
)

log = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator]
YSampler = Callable[[int, np.random.Generator], np.ndarray]

ADMISSIBILITY_SLACK = 1e-12


@dataclass(frozen=True)
class StableExponent:
    """g(u) = (beta + i gamma sgn u)|u|^alpha."""

    alpha: float
    beta: float
    gamma: float = 0.0

    @property
    def is_degenerate(self) -> bool:
        return self.beta == 0 and self.gamma == 0

    @property
    def is_symmetric(self) -> bool:
        return self.gamma == 0

    @classmethod
    def positive(cls, alpha: float, scale: float = 1.0) -> "StableExponent":
        """One-sided law on [0, inf) with Laplace transform exp(-scale u^alpha), alpha <= 1."""
        if not 0 < alpha <= 1:
            raise ParameterError(f"one-sided stable laws need alpha in (0, 1], got {alpha}")
        if alpha == 1:
            return cls(1.0, 0.0, -scale)
        angle = 0.5 * math.pi * alpha
        return cls(alpha, scale * math.cos(angle), -scale * math.sin(angle))


def check_admissible(exp: StableExponent) -> bool:
    alpha, beta, gamma = exp.alpha, exp.beta, exp.gamma
    if not 0 < alpha <= 2 or beta < 0:
        return False
    if beta == 0 and gamma == 0:
        return True
    if alpha == 2:
        return gamma == 0
    if alpha == 1:
        return True
    if beta == 0:
        return False
    bound = abs(math.tan(0.5 * math.pi * alpha))
    return abs(gamma / beta) <= bound * (1.0 + ADMISSIBILITY_SLACK)


def g_eval(exp: StableExponent, u):
    u = np.asarray(u, dtype=float)
    value = (exp.beta + 1j * exp.gamma * np.sign(u)) * np.abs(u) ** exp.alpha
    return complex(value) if np.ndim(value) == 0 else value


def _cms(alpha: float, skew: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-scale S1(alpha, skew) draws, alpha != 1, by the uniform-angle/exponential method."""
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, n)
    w = rng.standard_exponential(n)
    if skew == 0:
        shift, stretch = 0.0, 1.0
    else:
        t = skew * math.tan(0.5 * math.pi * alpha)
        shift = math.atan(t) / alpha
        stretch = (1.0 + t * t) ** (0.5 / alpha)
    angle = alpha * (v + shift)
    return (
        stretch
        * np.sin(angle)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - angle) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_strictly_stable(exp: StableExponent, n: int, seed: Seed) -> np.ndarray:
    """n draws with characteristic function e^{-g(u)}; zeros for the degenerate exponent."""
    if not check_admissible(exp):
        raise ParameterError(f"inadmissible exponent {exp}")
    if exp.is_degenerate:
        return np.zeros(n)
    rng = as_generator(seed, role="stable")
    if exp.alpha == 1:
        # beta |u| + i gamma u: Cauchy with scale beta shifted to -gamma
        v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, n)
        return exp.beta * np.tan(v) - exp.gamma
    scale = exp.beta ** (1.0 / exp.alpha)
    skew = 0.0 if exp.gamma == 0 else -exp.gamma / (exp.beta * math.tan(0.5 * math.pi * exp.alpha))
    return scale * _cms(exp.alpha, float(np.clip(skew, -1.0, 1.0)), n, rng)


def sample_product_representation(y_sampler: YSampler, exp: StableExponent, n: int, seed: int) -> np.ndarray:
    """Draws of Y^{1/alpha} Z with Y and Z on independent streams."""
    mixing = np.asarray(y_sampler(n, stream(seed, role="Y")), dtype=float)
    if np.any(mixing < 0):
        raise DomainError("sample_product_representation", "mixing variable Y must be nonnegative")
    stable = sample_strictly_stable(exp, n, stream(seed, role="Z"))
    return mixing ** (1.0 / exp.alpha) * stable


def kovalenko_half_density(x):
    """Density of the law with Laplace transform 1/(1 + sqrt(u)): 1/sqrt(pi x) - e^x erfc(sqrt x)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("kovalenko_half_density", "x must be positive")
    root = np.sqrt(x)
    value = 1.0 / np.sqrt(math.pi * x) - erfcx(root)
    return float(value) if value.ndim == 0 else value


def evaluate_f(L: LaplaceSpec, exp: StableExponent, u):
    """Characteristic function L(g(u)) of Y^{1/alpha} Z."""
    if L.complex_eval is None:
        raise UnsupportedError(f"transform '{L.name}' has no complex evaluator")
    value = L.complex_eval(np.asarray(g_eval(exp, u), dtype=complex))
    return complex(value) if np.ndim(value) == 0 else value


def composition_gap(L1: LaplaceSpec, exp1: StableExponent, L2: LaplaceSpec, exp2: StableExponent, u_grid) -> float:
    """sup |L1(g1(u)) - L2(g2(u))|; zero only when the two compositions give the same law."""
    return float(np.max(np.abs(evaluate_f(L1, exp1, u_grid) - evaluate_f(L2, exp2, u_grid))))


# --- closed-form laws ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClosedFormLaw:
    """
    A law with a closed-form transform and an exact sampler.

    kind is "chf" for laws on the real line (transform = characteristic
    function) and "laplace" for laws on [0, inf).
    """

    name: str
    params: Dict[str, float]
    kind: str
    transform: Callable
    sampler: Callable[[int, int], np.ndarray]
    laplace: Optional[LaplaceSpec] = None
    cdf: Optional[Callable] = None
    heavy_tailed: bool = False
    exponent: Optional[StableExponent] = field(default=None)

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        args = ",".join(f"{key}={value:g}" for key, value in self.params.items())
        return f"{self.name}:{args}"

    def sample(self, n: int, seed: int) -> np.ndarray:
        return self.sampler(n, seed)

    def laplace_spec(self) -> LaplaceSpec:
        if self.laplace is None:
            raise UnsupportedError(f"law '{self.name}' is not supported on [0, inf)")
        return self.laplace

    def default_grid(self) -> np.ndarray:
        return np.linspace(-10.0, 10.0, 201) if self.kind == "chf" else np.linspace(0.0, 10.0, 101)


def _exponential_mixing(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_exponential(n)


def _mixture(exponent: StableExponent) -> Callable[[int, int], np.ndarray]:
    return lambda n, seed: sample_product_representation(_exponential_mixing, exponent, n, seed)


def exponential1() -> ClosedFormLaw:
    laplace = exponential_transform()
    return ClosedFormLaw(
        name="exp1",
        params={},
        kind="laplace",
        transform=laplace,
        sampler=lambda n, seed: stream(seed, role="X").standard_exponential(n),
        laplace=laplace,
        cdf=lambda x: 1.0 - np.exp(-np.maximum(x, 0.0)),
    )


def gamma_law(shape: float, rate: float = 1.0) -> ClosedFormLaw:
    laplace = gamma_transform(shape, rate)
    return ClosedFormLaw(
        name="gamma",
        params={"shape": shape, "rate": rate},
        kind="laplace",
        transform=laplace,
        sampler=lambda n, seed: stream(seed, role="X").gamma(shape, 1.0 / rate, n),
        laplace=laplace,
    )


def linnik(alpha: float, beta: float = 1.0) -> ClosedFormLaw:
    """Characteristic function 1/(1 + beta |u|^alpha)."""
    if not 0 < alpha <= 2 or beta <= 0:
        raise ParameterError(f"linnik: alpha={alpha}, beta={beta} outside range")
    exponent = StableExponent(alpha, beta, 0.0)
    return ClosedFormLaw(
        name="linnik",
        params={"alpha": alpha, "beta": beta},
        kind="chf",
        transform=lambda u: 1.0 / (1.0 + beta * np.abs(u) ** alpha),
        sampler=_mixture(exponent),
        heavy_tailed=alpha < 2,
        exponent=exponent,
    )


def laplace_law(beta: float = 1.0) -> ClosedFormLaw:
    """Characteristic function 1/(1 + beta^2 u^2)."""
    if beta <= 0:
        raise ParameterError(f"laplace: beta={beta} must be positive")
    exponent = StableExponent(2.0, beta * beta, 0.0)
    return ClosedFormLaw(
        name="laplace",
        params={"beta": beta},
        kind="chf",
        transform=lambda u: 1.0 / (1.0 + beta * beta * np.asarray(u) ** 2),
        sampler=_mixture(exponent),
        cdf=lambda x: np.where(x < 0, 0.5 * np.exp(x / beta), 1.0 - 0.5 * np.exp(-np.abs(x) / beta)),
        exponent=exponent,
    )


def mittag_leffler(alpha: float, beta: float = 1.0) -> ClosedFormLaw:
    """Laplace transform 1/(1 + beta u^alpha), alpha in (0, 1]."""
    laplace = mittag_leffler_transform(alpha, beta)
    exponent = StableExponent.positive(alpha, beta)
    return ClosedFormLaw(
        name="mittag-leffler",
        params={"alpha": alpha, "beta": beta},
        kind="laplace",
        transform=laplace,
        sampler=_mixture(exponent),
        laplace=laplace,
        heavy_tailed=alpha < 1,
        exponent=exponent,
    )


def kovalenko_half() -> ClosedFormLaw:
    law = mittag_leffler(0.5, 1.0)
    return ClosedFormLaw(
        name="kovalenko-half",
        params={},
        kind="laplace",
        transform=law.transform,
        sampler=law.sampler,
        laplace=law.laplace,
        heavy_tailed=True,
        exponent=law.exponent,
    )


def gaussian_mix(sigma: float = 1.0) -> ClosedFormLaw:
    """sqrt(Y) Z with Y ~ Exp(1), Z ~ N(0, sigma^2): characteristic function 1/(1 + sigma^2 u^2 / 2)."""
    if sigma <= 0:
        raise ParameterError(f"gaussian-mix: sigma={sigma} must be positive")
    exponent = StableExponent(2.0, 0.5 * sigma * sigma, 0.0)
    return ClosedFormLaw(
        name="gaussian-mix",
        params={"sigma": sigma},
        kind="chf",
        transform=lambda u: 1.0 / (1.0 + 0.5 * sigma * sigma * np.asarray(u) ** 2),
        sampler=_mixture(exponent),
        exponent=exponent,
    )
