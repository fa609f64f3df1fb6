"""Problem-dependent hyperparameters from a batch of gradient estimates at x0.

beta1 is half the grid value whose estimates have the smallest average per-coordinate
variance. The x step size is a fixed coefficient divided by the normalized gradient norm.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from cvar_bbo.blackbox import EvaluationBudget, Problem
from cvar_bbo.lagrangian import LagrangeState, stacked_gradient
from cvar_bbo.ramsa import SolverConfig
from cvar_bbo.smoothing import KernelKind, SmoothingKernel
from cvar_bbo.types.constants import (
    BETA1_GRID,
    DEFAULT_BETA2,
    GAUSSIAN_S2_COEFF,
    NORM_BETA1,
    T_MAX,
    TRUNCATED_S2_COEFF,
    TUNE_SAMPLES,
)
from cvar_bbo.types.exception import (
    BudgetExhaustedException,
    EvaluationException,
    InvalidParamsException,
    TuningException,
)

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100


def default_coeff(kernel: KernelKind) -> float:
    return TRUNCATED_S2_COEFF if kernel == KernelKind.TRUNCATED else GAUSSIAN_S2_COEFF


class TuneReport:
    def __init__(self, problem: str, kernel: KernelKind, grid: Sequence[float], samples: int,
                 avg_variance: Optional[Sequence[float]] = None, argmin_beta1: Optional[float] = None,
                 chosen_beta1: Optional[float] = None, grad_norm_ratio: Optional[float] = None,
                 coeff: Optional[float] = None, chosen_s2: Optional[float] = None, evaluations: int = 0):
        self.problem = problem
        self.kernel = kernel
        self.grid = list(grid)
        self.samples = samples
        self.avg_variance = list(avg_variance) if avg_variance is not None else []
        self.argmin_beta1 = argmin_beta1
        self.chosen_beta1 = chosen_beta1
        self.grad_norm_ratio = grad_norm_ratio
        self.coeff = coeff
        self.chosen_s2 = chosen_s2
        self.evaluations = evaluations

    def __repr__(self):
        return f"TuneReport(problem={self.problem}, beta1={self.chosen_beta1}, s2={self.chosen_s2})"

    @property
    def complete(self) -> bool:
        return self.chosen_beta1 is not None and self.chosen_s2 is not None

    def solver_config(self, base: Optional[SolverConfig] = None) -> SolverConfig:
        """Config with the tuned beta1 and x step size, other values from `base` or the defaults."""
        if not self.complete:
            raise TuningException("Tuning did not complete", self)
        base = base if base is not None else SolverConfig(kernel=self.kernel)
        s0 = list(base.s0)
        s0[1] = self.chosen_s2
        return base.copy(beta1=self.chosen_beta1, s0=s0, kernel=self.kernel.value)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "kernel": self.kernel.value,
            "grid": self.grid,
            "samples": self.samples,
            "avg_variance": self.avg_variance,
            "argmin_beta1": self.argmin_beta1,
            "chosen_beta1": self.chosen_beta1,
            "grad_norm_ratio": self.grad_norm_ratio,
            "coeff": self.coeff,
            "chosen_s2": self.chosen_s2,
            "evaluations": self.evaluations,
        }


def gradient_samples(problem: Problem, x0_unit: np.ndarray, beta1: float, samples: int, kernel: KernelKind,
                     rng: np.random.Generator, budget: Optional[EvaluationBudget] = None,
                     beta2: float = DEFAULT_BETA2, t_max: float = T_MAX) -> np.ndarray:
    """x-parts of `samples` stacked gradients at (x0, t=0, lam=0) with alpha = 0, shape (samples, n).

    A non-finite output redraws the noise once, like the solver does.
    """
    state = LagrangeState.initial(x0_unit, problem.m)
    kernel_x = SmoothingKernel(kernel, beta1)
    kernel_t = SmoothingKernel(kernel, beta2)
    alpha = np.zeros(problem.m + 1)
    check_bounds = kernel == KernelKind.TRUNCATED
    box = problem.box
    x = box.scale(state.x)
    out = np.empty((samples, problem.n))
    for i in range(samples):
        u, mu_u = kernel_x.draw(state.x, 0.0, 1.0, rng)
        v, mu_v = kernel_t.draw(state.t, -t_max, t_max, rng)
        for attempt in range(2):
            xi1 = problem.sample(rng, x, box.scale(state.x + beta1 * u))
            xi2 = problem.sample(rng, x)
            try:
                g = stacked_gradient(problem, state, u, v, mu_u, mu_v, beta1, beta2, xi1, xi2, alpha,
                                     budget=budget, check_bounds=check_bounds)
                break
            except EvaluationException as e:
                if attempt == 1:
                    raise
                logger.warning(f"{problem.name}: {e.message}, resampling noise")
        out[i] = g.g_x
    return out


def average_variance(g_x: np.ndarray) -> float:
    return float(np.var(g_x, axis=0, ddof=1).mean())


def grad_norm_ratio(g_x: np.ndarray) -> float:
    return float(np.linalg.norm(g_x.mean(axis=0)) / np.sqrt(g_x.shape[1]))


def _argmin_larger(grid: Sequence[float], variances: Sequence[float]) -> float:
    variances = np.asarray(variances)
    best = variances.min()
    tied = [b for b, v in zip(grid, variances) if v <= best * (1.0 + 1e-9)]
    return max(tied)


def select_s2(ratio: float, coeff: float) -> float:
    if not ratio > 0:
        raise TuningException(f"Gradient norm is {ratio}: landscape looks constant at x0")
    return coeff / ratio


def _tune(problem: Problem, x0_unit: Optional[np.ndarray], grid: Sequence[float], samples: int,
          kernel: KernelKind, seed: int, budget: Optional[int], coeff: Optional[float],
          with_s2: bool) -> TuneReport:
    if samples < MIN_SAMPLES:
        raise InvalidParamsException(f"At least {MIN_SAMPLES} samples are required, got {samples}")
    grid = sorted(float(b) for b in grid)
    if not grid or grid[0] <= 0:
        raise InvalidParamsException(f"Invalid beta1 grid {grid}")
    x0_unit = problem.unit_x0() if x0_unit is None else np.asarray(x0_unit, dtype=float)
    coeff = default_coeff(kernel) if coeff is None else coeff
    needs_norm = with_s2 and NORM_BETA1 not in grid
    if budget is None:
        # two calls per estimate, four when its noise is redrawn
        budget = 4 * samples * (len(grid) + (1 if needs_norm else 0))
    counter = EvaluationBudget(budget)
    rng = np.random.default_rng(seed)
    report = TuneReport(problem.name, kernel, grid, samples, coeff=coeff)

    norm_samples = None
    try:
        for beta1 in grid:
            g_x = gradient_samples(problem, x0_unit, beta1, samples, kernel, rng, counter)
            report.avg_variance.append(average_variance(g_x))
            logger.info(f"{problem.name} beta1={beta1}: average variance {report.avg_variance[-1]:.6g}")
            if beta1 == NORM_BETA1:
                norm_samples = g_x
        report.argmin_beta1 = _argmin_larger(grid, report.avg_variance)
        report.chosen_beta1 = report.argmin_beta1 / 2.0
        if with_s2:
            if norm_samples is None:
                norm_samples = gradient_samples(problem, x0_unit, NORM_BETA1, samples, kernel, rng, counter)
            report.grad_norm_ratio = grad_norm_ratio(norm_samples)
    except BudgetExhaustedException as e:
        report.evaluations = counter.calls_used
        raise TuningException(f"Tuning stopped early: {e.message}", report)
    report.evaluations = counter.calls_used

    if with_s2:
        try:
            report.chosen_s2 = select_s2(report.grad_norm_ratio, coeff)
        except TuningException as e:
            raise TuningException(e.message, report)
    return report


def select_beta1(problem: Problem, x0_unit: Optional[np.ndarray] = None, grid: Sequence[float] = BETA1_GRID,
                 samples: int = TUNE_SAMPLES, kernel: KernelKind = KernelKind.GAUSSIAN, seed: int = 0,
                 budget: Optional[int] = None) -> Tuple[float, TuneReport]:
    report = _tune(problem, x0_unit, grid, samples, kernel, seed, budget, None, with_s2=False)
    return report.chosen_beta1, report


def tune(problem: Problem, x0_unit: Optional[np.ndarray] = None, grid: Sequence[float] = BETA1_GRID,
         samples: int = TUNE_SAMPLES, kernel: KernelKind = KernelKind.GAUSSIAN, seed: int = 0,
         budget: Optional[int] = None, coeff: Optional[float] = None) -> TuneReport:
    """beta1 and the x step size in one pass; the norm reuses the beta1 = 0.1 estimates when on the grid."""
    return _tune(problem, x0_unit, grid, samples, kernel, seed, budget, coeff, with_s2=True)
