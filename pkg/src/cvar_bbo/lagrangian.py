from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from cvar_bbo.blackbox import EvaluationBudget, Problem, evaluate_transformed
from cvar_bbo.cvar import alpha_values, sample_V
from cvar_bbo.types.constants import LAMBDA_MAX, T_MAX
from cvar_bbo.types.exception import InvalidParamsException

logger = logging.getLogger(__name__)


class LagrangeState:
    """Primal x (unit cube, n), auxiliary t (m+1), multipliers lam (m)."""

    def __init__(self, x: np.ndarray, t: np.ndarray, lam: np.ndarray):
        self.x = np.asarray(x, dtype=float).copy()
        self.t = np.asarray(t, dtype=float).copy()
        self.lam = np.asarray(lam, dtype=float).copy()
        if self.t.size != self.lam.size + 1:
            raise InvalidParamsException(f"t has {self.t.size} entries, expected {self.lam.size + 1}")

    def __repr__(self):
        return f"LagrangeState(x={self.x.tolist()}, t={self.t.tolist()}, lam={self.lam.tolist()})"

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def m(self) -> int:
        return self.lam.size

    def copy(self) -> LagrangeState:
        return LagrangeState(self.x, self.t, self.lam)

    def is_admissible(self, t_max: float = T_MAX, lambda_max: float = LAMBDA_MAX) -> bool:
        return bool(((self.x >= 0) & (self.x <= 1)).all()
                    and (np.abs(self.t) <= t_max).all()
                    and ((self.lam >= 0) & (self.lam <= lambda_max)).all())

    @staticmethod
    def initial(x0_unit: np.ndarray, m: int) -> LagrangeState:
        return LagrangeState(x0_unit, np.zeros(m + 1), np.zeros(m))


class StackedGradient:
    """Gradient estimate flattened as [x (n), t (m+1), lam (m)]."""

    def __init__(self, g_x: np.ndarray, g_t: np.ndarray, g_lam: np.ndarray):
        self.g_x = np.asarray(g_x, dtype=float)
        self.g_t = np.asarray(g_t, dtype=float)
        self.g_lam = np.asarray(g_lam, dtype=float)

    def __repr__(self):
        return f"StackedGradient(g_x={self.g_x.tolist()}, g_t={self.g_t.tolist()}, g_lam={self.g_lam.tolist()})"

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.g_x, self.g_t, self.g_lam])

    @staticmethod
    def from_flat(values: np.ndarray, n: int, m: int) -> StackedGradient:
        values = np.asarray(values, dtype=float)
        if values.size != n + 2 * m + 1:
            raise InvalidParamsException(f"Expected {n + 2 * m + 1} entries, got {values.size}")
        return StackedGradient(values[:n], values[n:n + m + 1], values[n + m + 1:])


class Perturbation:
    """One smoothing draw: directions u (x) and v (t), their kernel means, and the noise realization."""

    def __init__(self, u: np.ndarray, v: np.ndarray, mu_u: np.ndarray, mu_v: np.ndarray, xi: np.ndarray):
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.mu_u = np.asarray(mu_u, dtype=float)
        self.mu_v = np.asarray(mu_v, dtype=float)
        self.xi = np.asarray(xi, dtype=float)


def lagrangian_value(outputs: np.ndarray, t: np.ndarray, lam: np.ndarray, alpha) -> float:
    """V_a0(c0, t0) + sum_j lam_j V_aj(c_j, t_j) for transformed outputs c."""
    v = sample_V(outputs, t, alpha_values(alpha))
    v = np.atleast_1d(v)
    return float(v[0] + np.dot(lam, v[1:]))


def noisy_lagrangian(problem: Problem, state: LagrangeState, xi: np.ndarray, alpha,
                     budget: Optional[EvaluationBudget] = None, check_bounds: bool = False) -> float:
    outputs = evaluate_transformed(problem, state.x, xi, budget, check_bounds)
    return lagrangian_value(outputs, state.t, state.lam, alpha)


def stacked_gradient(problem: Problem, state: LagrangeState, u: np.ndarray, v: np.ndarray,
                     mu1: np.ndarray, mu2: np.ndarray, beta1: float, beta2: float,
                     xi1: np.ndarray, xi2: np.ndarray, alpha,
                     budget: Optional[EvaluationBudget] = None, strict_two_eval: bool = True,
                     check_bounds: bool = False, backward: Optional[Perturbation] = None) -> StackedGradient:
    """Zeroth-order estimate of the Lagrangian gradient in (x, t) and its lam-gradient.

    The forward point (x + beta1 u, t + beta2 v) uses xi1, the base point uses xi2. The
    lam-gradient reuses the base outputs unless `strict_two_eval` is off, in which case a
    third evaluation at x with xi1 supplies it. With `backward`, the x and t parts are
    two-sided, the backward point being (x - beta1 u2, t - beta2 v2).
    """
    alpha = np.broadcast_to(alpha_values(alpha), (state.m + 1,))
    forward_out = evaluate_transformed(problem, state.x + beta1 * u, xi1, budget, check_bounds)
    base_out = evaluate_transformed(problem, state.x, xi2, budget, check_bounds)
    forward = lagrangian_value(forward_out, state.t + beta2 * v, state.lam, alpha)
    base = lagrangian_value(base_out, state.t, state.lam, alpha)

    g_x = (forward - base) * (np.asarray(u) - mu1)
    g_t = (forward - base) * (np.asarray(v) - mu2)
    if backward is not None:
        backward_out = evaluate_transformed(problem, state.x - beta1 * backward.u, backward.xi, budget,
                                            check_bounds)
        behind = lagrangian_value(backward_out, state.t - beta2 * backward.v, state.lam, alpha)
        g_x = (g_x - (behind - base) * (backward.u - backward.mu_u)) / 2.0
        g_t = (g_t - (behind - base) * (backward.v - backward.mu_v)) / 2.0
    g_x = g_x / beta1
    g_t = g_t / beta2

    lam_out = base_out
    if not strict_two_eval:
        lam_out = evaluate_transformed(problem, state.x, xi1, budget, check_bounds)
    g_lam = np.atleast_1d(sample_V(lam_out[1:], state.t[1:], alpha[1:]))
    return StackedGradient(g_x, g_t, g_lam)
