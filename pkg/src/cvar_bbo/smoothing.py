"""Smoothing kernels and zeroth-order gradient estimators.

Truncated kernels keep every query point inside the unit cube by drawing each
perturbation component from a standard normal restricted to
[(0 - x_i) / beta, (1 - x_i) / beta]. The gradient estimators use the kernel
mean so that they are unbiased for the gradient of the smoothed function.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import ndtr, ndtri

from cvar_bbo.types.constants import DEGENERATE_WIDTH, MIN_MASS
from cvar_bbo.types.exception import DegenerateIntervalException, InvalidParamsException

logger = logging.getLogger(__name__)

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

ArrayLike = Union[float, np.ndarray]


class KernelKind(Enum):
    TRUNCATED = "truncated"
    GAUSSIAN = "gaussian"

    def __str__(self):
        return self.value

    @staticmethod
    def from_string(value: str) -> KernelKind:
        try:
            return KernelKind(value.lower())
        except ValueError:
            raise InvalidParamsException(f"Unknown kernel '{value}'")


def std_normal_pdf(z: ArrayLike) -> ArrayLike:
    z = np.asarray(z, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def std_normal_cdf(z: ArrayLike) -> ArrayLike:
    return ndtr(z)


class TruncBounds:
    """Per-component standardized truncation interval, lower < upper, infinities allowed."""

    def __init__(self, lower: ArrayLike, upper: ArrayLike):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape:
            raise InvalidParamsException(f"Bound shapes differ: {lower.shape} != {upper.shape}")
        if np.isnan(lower).any() or np.isnan(upper).any() or (lower >= upper).any():
            raise InvalidParamsException(f"Invalid truncation bounds lower={lower} upper={upper}")
        self.__lower = lower
        self.__upper = upper

    def __repr__(self):
        return f"TruncBounds(lower={self.__lower}, upper={self.__upper})"

    @property
    def lower(self) -> np.ndarray:
        return self.__lower

    @property
    def upper(self) -> np.ndarray:
        return self.__upper

    @property
    def dim(self) -> int:
        return self.__lower.size

    def is_unbounded(self) -> bool:
        return bool(np.isneginf(self.__lower).all() and np.isposinf(self.__upper).all())

    def reflected(self) -> TruncBounds:
        return TruncBounds(-self.__upper, -self.__lower)

    @staticmethod
    def around(center: ArrayLike, lower: ArrayLike, upper: ArrayLike, beta: float) -> TruncBounds:
        center = np.asarray(center, dtype=float)
        return TruncBounds((np.asarray(lower, dtype=float) - center) / beta,
                           (np.asarray(upper, dtype=float) - center) / beta)


def _oriented(lower: np.ndarray, upper: np.ndarray):
    # mirror intervals lying right of zero so cdf differences are taken in the left tail
    flip = lower > 0
    return flip, np.where(flip, -upper, lower), np.where(flip, -lower, upper)


def trunc_normal_mass(lower: ArrayLike, upper: ArrayLike) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    _, lo, hi = _oriented(lower, upper)
    return ndtr(hi) - ndtr(lo)


def trunc_normal_mean(bounds: TruncBounds) -> np.ndarray:
    """Mean of the standard normal restricted to each interval."""
    mass = trunc_normal_mass(bounds.lower, bounds.upper)
    if (mass < MIN_MASS).any():
        raise DegenerateIntervalException(f"Truncation interval has no mass: {bounds}")
    return (std_normal_pdf(bounds.lower) - std_normal_pdf(bounds.upper)) / mass


def trunc_normal_ppf(q: ArrayLike, lower: ArrayLike, upper: ArrayLike) -> np.ndarray:
    """Inverse cdf of the truncated standard normal, strictly inside (lower, upper)."""
    q, lower, upper = np.broadcast_arrays(np.asarray(q, dtype=float),
                                          np.asarray(lower, dtype=float),
                                          np.asarray(upper, dtype=float))
    flip, lo, hi = _oriented(lower, upper)
    q = np.where(flip, 1.0 - q, q)
    cdf_lo = ndtr(lo)
    z = ndtri(cdf_lo + q * (ndtr(hi) - cdf_lo))
    z = np.where(flip, -z, z)
    return np.clip(z, np.nextafter(lower, upper), np.nextafter(upper, lower))


def sample_trunc_normal(bounds: TruncBounds, rng: np.random.Generator) -> np.ndarray:
    if bounds.is_unbounded():
        return rng.standard_normal(bounds.dim)
    if ((bounds.upper - bounds.lower) < DEGENERATE_WIDTH).any():
        raise DegenerateIntervalException(f"Truncation interval too narrow: {bounds}")
    if (trunc_normal_mass(bounds.lower, bounds.upper) < MIN_MASS).any():
        raise DegenerateIntervalException(f"Truncation interval has no mass: {bounds}")
    return trunc_normal_ppf(rng.random(bounds.dim), bounds.lower, bounds.upper)


def _weighted(direction: np.ndarray, diff: ArrayLike) -> np.ndarray:
    direction = np.asarray(direction, dtype=float)
    diff = np.asarray(diff, dtype=float)
    if direction.ndim > diff.ndim:
        diff = diff[..., np.newaxis]
    return direction * diff


def one_sided_estimate(u: ArrayLike, mu: ArrayLike, forward: ArrayLike, base: ArrayLike,
                       beta: float) -> np.ndarray:
    """(u - mu) * (f(x + beta u) - f(x)) / beta, broadcast over leading batch axes."""
    return _weighted(np.asarray(u) - np.asarray(mu), np.asarray(forward) - np.asarray(base)) / beta


def two_sided_estimate(u1: ArrayLike, mu1: ArrayLike, forward: ArrayLike,
                       u2: ArrayLike, mu2: ArrayLike, backward: ArrayLike,
                       base: ArrayLike, beta: float) -> np.ndarray:
    """Mirrored estimator. u2 comes from the reflected interval and is applied as x - beta u2."""
    a = _weighted(np.asarray(u1) - np.asarray(mu1), np.asarray(forward) - np.asarray(base))
    b = _weighted(np.asarray(u2) - np.asarray(mu2), np.asarray(backward) - np.asarray(base))
    return (a - b) / (2.0 * beta)


def gaussian_estimate(u: ArrayLike, forward: ArrayLike, base: ArrayLike, beta: float) -> np.ndarray:
    return _weighted(u, np.asarray(forward) - np.asarray(base)) / beta


class SmoothingKernel:
    def __init__(self, kind: KernelKind, beta: float):
        if not beta > 0:
            raise InvalidParamsException(f"Invalid smoothing parameter {beta}")
        self.__kind = kind
        self.__beta = float(beta)

    def __repr__(self):
        return f"SmoothingKernel(kind={self.__kind}, beta={self.__beta})"

    @property
    def kind(self) -> KernelKind:
        return self.__kind

    @property
    def beta(self) -> float:
        return self.__beta

    def draw(self, center: ArrayLike, lower: ArrayLike, upper: ArrayLike, rng: np.random.Generator,
             reflected: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """Returns a direction and the kernel mean for a point inside [lower, upper].

        With `reflected`, the direction is meant to be applied as center - beta * u.
        """
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if self.__kind == KernelKind.GAUSSIAN:
            return rng.standard_normal(center.size), np.zeros(center.size)
        bounds = TruncBounds.around(center, lower, upper, self.__beta)
        if reflected:
            bounds = bounds.reflected()
        return sample_trunc_normal(bounds, rng), trunc_normal_mean(bounds)

    def mean(self, center: ArrayLike, lower: ArrayLike, upper: ArrayLike,
             reflected: bool = False) -> Optional[np.ndarray]:
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if self.__kind == KernelKind.GAUSSIAN:
            return np.zeros(center.size)
        bounds = TruncBounds.around(center, lower, upper, self.__beta)
        return trunc_normal_mean(bounds.reflected() if reflected else bounds)
