"""Empirical Value-at-Risk and Conditional Value-at-Risk.

CVaR_a(C) = min_t t + E[max(0, C - t)] / (1 - a); the minimizing t is VaR_a(C).
"""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from cvar_bbo.types.exception import InvalidParamsException
from cvar_bbo.types.risk_level import RiskLevel

Alpha = Union[float, RiskLevel, Sequence[float], np.ndarray]

# guards ceil(alpha * n) against values like 0.8 * 10 = 8.000000000000002
_QUANTILE_SLACK = 1e-9


def alpha_values(alpha: Alpha) -> np.ndarray:
    if isinstance(alpha, RiskLevel):
        return np.asarray(alpha.value)
    values = np.asarray(alpha, dtype=float)
    if np.isnan(values).any() or (values < 0).any() or (values >= 1).any():
        raise InvalidParamsException(f"Invalid risk level {alpha}. Must satisfy 0 <= alpha < 1")
    return values


class SampleBatch:
    """Finite realizations of one scalar random output."""

    def __init__(self, values: Sequence[float], source: str = ""):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size == 0:
            raise InvalidParamsException("Empty sample batch")
        if not np.isfinite(values).all():
            raise InvalidParamsException("Sample batch contains non-finite values")
        self.__values = values
        self.__source = source

    def __repr__(self):
        return f"SampleBatch(n={self.__values.size}, source={self.__source})"

    def __len__(self):
        return self.__values.size

    @property
    def values(self) -> np.ndarray:
        return self.__values

    @property
    def source(self) -> str:
        return self.__source


def sample_V(c, t, alpha: Alpha):
    """t + max(0, c - t) / (1 - alpha), elementwise."""
    a = alpha_values(alpha)
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    out = t + np.maximum(0.0, c - t) / (1.0 - a)
    return float(out) if out.ndim == 0 else out


def empirical_V(batch: SampleBatch, t, alpha: Alpha):
    """Sample mean of V over the batch, for a scalar t or an array of them."""
    t = np.asarray(t, dtype=float)
    a = float(alpha_values(alpha))
    values = batch.values.reshape((-1,) + (1,) * t.ndim)
    out = (t + np.maximum(0.0, values - t) / (1.0 - a)).mean(axis=0)
    return float(out) if out.ndim == 0 else out


def mc_var(batch: SampleBatch, alpha: Alpha) -> float:
    """Left alpha-quantile of the batch."""
    a = float(alpha_values(alpha))
    n = len(batch)
    index = max(math.ceil(a * n - _QUANTILE_SLACK) - 1, 0)
    return float(np.partition(batch.values, index)[index])


def mc_cvar(batch: SampleBatch, alpha: Alpha) -> float:
    a = float(alpha_values(alpha))
    var = mc_var(batch, a)
    return var + float(np.maximum(0.0, batch.values - var).mean()) / (1.0 - a)
