"""Multi-timescale projected stochastic approximation for CVaR-constrained blackbox problems.

Four step-size schedules drive, from slowest to fastest, the multipliers lam (ascent), the
design x, the auxiliary thresholds t (descent) and the gradient moments M, V. Every update
is an adaptive step s * M / (sqrt(V) + eps) followed by a projection onto the variable's box.
"""

from __future__ import annotations

import csv
import logging
from collections import deque
from enum import Enum
from typing import IO, List, Optional, Sequence, Tuple, Union

import numpy as np

from cvar_bbo.blackbox import Box, EvaluationBudget, Problem
from cvar_bbo.lagrangian import LagrangeState, Perturbation, StackedGradient, stacked_gradient
from cvar_bbo.smoothing import KernelKind, SmoothingKernel
from cvar_bbo.types.constants import (
    DEFAULT_ALPHA_STAR,
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_BUDGET,
    DEFAULT_S0,
    DEFAULT_TAU,
    EPSILON,
    LAMBDA_MAX,
    T_MAX,
)
from cvar_bbo.types.exception import (
    BudgetExhaustedException,
    EvaluationException,
    IllegalFormatException,
    InvalidParamsException,
    InvalidStateException,
)

logger = logging.getLogger(__name__)


class Direction(Enum):
    DESCENT = -1
    ASCENT = 1


class Estimator(Enum):
    ONE_SIDED = "one_sided"
    TWO_SIDED = "two_sided"

    def __str__(self):
        return self.value

    @staticmethod
    def from_string(value: str) -> Estimator:
        try:
            return Estimator(value.lower())
        except ValueError:
            raise InvalidParamsException(f"Unknown estimator '{value}'")


class StepSchedule:
    def __init__(self, s0: float, tau: float):
        if not s0 > 0:
            raise InvalidParamsException(f"Invalid initial step size {s0}")
        if not 0.5 < tau < 1.0:
            raise InvalidParamsException(f"Invalid decay exponent {tau}: must lie in (0.5, 1)")
        self.__s0 = float(s0)
        self.__tau = float(tau)

    def __repr__(self):
        return f"StepSchedule(s0={self.__s0}, tau={self.__tau})"

    def __eq__(self, other):
        return isinstance(other, StepSchedule) and self.__s0 == other.s0 and self.__tau == other.tau

    @property
    def s0(self) -> float:
        return self.__s0

    @property
    def tau(self) -> float:
        return self.__tau

    def value(self, k: int) -> float:
        return step_size(self, k)


def step_size(sched: StepSchedule, k: int) -> float:
    if k < 0:
        raise InvalidParamsException(f"Invalid iteration {k}")
    return sched.s0 / (k + 1) ** sched.tau


def update_moments(M: np.ndarray, V: np.ndarray, g: np.ndarray, s4: float) -> Tuple[np.ndarray, np.ndarray]:
    g = np.asarray(g, dtype=float)
    return s4 * g + (1.0 - s4) * np.asarray(M), s4 * g * g + (1.0 - s4) * np.asarray(V)


def projected_update(z: np.ndarray, m_part: np.ndarray, v_part: np.ndarray, s: float, eps: float,
                     box: Box, sign: Direction) -> np.ndarray:
    step = s * np.asarray(m_part) / (np.sqrt(np.asarray(v_part)) + eps)
    return np.clip(np.asarray(z) + sign.value * step, box.lower, box.upper)


def alpha_step(alpha_k, alpha_star, gamma: float):
    return alpha_star + gamma * (np.asarray(alpha_k) - alpha_star)


class SolverConfig:
    """Hyperparameters of one run.

    Schedules are ordered (lam, x, t, moments). `k_max` and `gamma` are derived from the
    budget when left unset.
    """

    FIELDS = ("beta1", "beta2", "s0", "tau", "alpha_star", "gamma", "epsilon", "budget", "k_max",
              "t_max", "lambda_max", "kernel", "estimator", "strict_two_eval", "seed", "x0", "debug",
              "trace", "trace_size", "log_every")

    def __init__(self,
                 beta1: float = DEFAULT_BETA1,
                 beta2: float = DEFAULT_BETA2,
                 s0: Sequence[float] = DEFAULT_S0,
                 tau: Sequence[float] = DEFAULT_TAU,
                 alpha_star: Union[float, Sequence[float]] = DEFAULT_ALPHA_STAR,
                 gamma: Optional[float] = None,
                 epsilon: float = EPSILON,
                 budget: int = DEFAULT_BUDGET,
                 k_max: Optional[int] = None,
                 t_max: float = T_MAX,
                 lambda_max: float = LAMBDA_MAX,
                 kernel: Union[KernelKind, str] = KernelKind.GAUSSIAN,
                 estimator: Union[Estimator, str] = Estimator.ONE_SIDED,
                 strict_two_eval: bool = True,
                 seed: int = 0,
                 x0: Optional[Sequence[float]] = None,
                 debug: bool = False,
                 trace: bool = False,
                 trace_size: Optional[int] = None,
                 log_every: int = 500):
        if len(s0) != 4 or len(tau) != 4:
            raise InvalidParamsException("Exactly four step schedules are required (lam, x, t, moments)")
        self.schedules = [StepSchedule(s, t) for s, t in zip(s0, tau)]
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.alpha_star = float(alpha_star) if np.ndim(alpha_star) == 0 else [float(a) for a in alpha_star]
        self.gamma = gamma
        self.epsilon = float(epsilon)
        self.budget = int(budget)
        self.k_max = k_max
        self.t_max = float(t_max)
        self.lambda_max = float(lambda_max)
        self.kernel = kernel if isinstance(kernel, KernelKind) else KernelKind.from_string(kernel)
        self.estimator = estimator if isinstance(estimator, Estimator) else Estimator.from_string(estimator)
        self.strict_two_eval = bool(strict_two_eval)
        self.seed = int(seed)
        self.x0 = None if x0 is None else [float(v) for v in x0]
        self.debug = bool(debug)
        self.trace = bool(trace)
        self.trace_size = trace_size
        self.log_every = int(log_every)
        self.validate()

    def __repr__(self):
        return f"SolverConfig({self.to_dict()})"

    def __eq__(self, other):
        return isinstance(other, SolverConfig) and self.to_dict() == other.to_dict()

    def validate(self):
        if not self.beta1 > 0 or not self.beta2 > 0:
            raise InvalidParamsException(f"Invalid smoothing parameters beta1={self.beta1} beta2={self.beta2}")
        taus = [s.tau for s in self.schedules]
        if not taus[0] > taus[1] > taus[2] > taus[3]:
            raise InvalidParamsException(f"Decay exponents must be strictly decreasing from lam to moments: {taus}")
        if not 0 < self.schedules[3].s0 <= 1:
            raise InvalidParamsException(f"Moment step size must lie in (0, 1]: {self.schedules[3].s0}")
        stars = np.atleast_1d(np.asarray(self.alpha_star, dtype=float))
        if (stars < 0).any() or (stars >= 1).any():
            raise InvalidParamsException(f"Invalid target risk levels {self.alpha_star}")
        if self.gamma is not None and not 0 <= self.gamma < 1:
            raise InvalidParamsException(f"Invalid gamma {self.gamma}: must satisfy 0 <= gamma < 1")
        if not self.epsilon > 0:
            raise InvalidParamsException(f"Invalid epsilon {self.epsilon}")
        if not self.t_max > 0 or not self.lambda_max > 0:
            raise InvalidParamsException(f"Invalid boxes t_max={self.t_max} lambda_max={self.lambda_max}")
        if self.budget < 0:
            raise InvalidParamsException(f"Invalid budget {self.budget}")
        if self.k_max is not None and self.k_max < 1:
            raise InvalidParamsException(f"Invalid k_max {self.k_max}")
        if self.trace_size is not None and self.trace_size < 1:
            raise InvalidParamsException(f"Invalid trace size {self.trace_size}")
        if self.log_every < 1:
            raise InvalidParamsException(f"Invalid log interval {self.log_every}")

    @property
    def s0(self) -> List[float]:
        return [s.s0 for s in self.schedules]

    @property
    def tau(self) -> List[float]:
        return [s.tau for s in self.schedules]

    def calls_per_iteration(self) -> int:
        calls = 2
        if self.estimator == Estimator.TWO_SIDED:
            calls += 1
        if not self.strict_two_eval:
            calls += 1
        return calls

    def resolved_k_max(self) -> int:
        """Iteration count; one gradient worth of calls is reserved for seeding the moments."""
        cpi = self.calls_per_iteration()
        if self.k_max is not None:
            if cpi * (self.k_max + 1) > self.budget:
                raise InvalidParamsException(
                    f"Budget {self.budget} cannot cover {self.k_max} iterations of {cpi} calls plus seeding")
            return self.k_max
        k_max = self.budget // cpi - 1
        if k_max < 1:
            raise InvalidParamsException(f"Budget {self.budget} too small for a single iteration")
        return k_max

    def resolved_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return max(0.0, 1.0 - 5.0 / (2.0 * self.resolved_k_max()))

    def alpha_star_vector(self, m: int) -> np.ndarray:
        stars = np.asarray(self.alpha_star, dtype=float)
        if stars.ndim == 0:
            return np.full(m + 1, float(stars))
        if stars.size != m + 1:
            raise InvalidParamsException(f"Expected {m + 1} target risk levels, got {stars.size}")
        return stars

    def copy(self, **overrides) -> SolverConfig:
        values = self.to_dict()
        for key, value in overrides.items():
            if key not in self.FIELDS:
                raise InvalidParamsException(f"Unknown solver option '{key}'")
            values[key] = value
        return SolverConfig.from_dict(values)

    def to_dict(self) -> dict:
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "s0": self.s0,
            "tau": self.tau,
            "alpha_star": self.alpha_star,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "budget": self.budget,
            "k_max": self.k_max,
            "t_max": self.t_max,
            "lambda_max": self.lambda_max,
            "kernel": self.kernel.value,
            "estimator": self.estimator.value,
            "strict_two_eval": self.strict_two_eval,
            "seed": self.seed,
            "x0": self.x0,
            "debug": self.debug,
            "trace": self.trace,
            "trace_size": self.trace_size,
            "log_every": self.log_every,
        }

    @staticmethod
    def from_dict(values: dict) -> SolverConfig:
        unknown = set(values) - set(SolverConfig.FIELDS)
        if unknown:
            raise IllegalFormatException(f"Unknown solver options: {', '.join(sorted(unknown))}")
        return SolverConfig(**values)


class SolverState:
    def __init__(self, lagrange: LagrangeState, M: np.ndarray, V: np.ndarray, alpha: np.ndarray, k: int = 0):
        self.lagrange = lagrange
        self.M = np.asarray(M, dtype=float)
        self.V = np.asarray(V, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        self.k = k

    def __repr__(self):
        return f"SolverState(k={self.k}, {self.lagrange}, alpha={self.alpha.tolist()})"

    @property
    def x(self) -> np.ndarray:
        return self.lagrange.x

    @property
    def t(self) -> np.ndarray:
        return self.lagrange.t

    @property
    def lam(self) -> np.ndarray:
        return self.lagrange.lam


class TraceRecord:
    def __init__(self, k: int, x: np.ndarray, t: np.ndarray, lam: np.ndarray, alpha: np.ndarray,
                 steps: Sequence[float], M: np.ndarray, V: np.ndarray, g: np.ndarray):
        self.k = k
        self.x = x.copy()
        self.t = t.copy()
        self.lam = lam.copy()
        self.alpha = alpha.copy()
        self.steps = list(steps)
        self.M = M.copy()
        self.V = V.copy()
        self.g = g.copy()

    def __repr__(self):
        return f"TraceRecord(k={self.k}, x={self.x.tolist()})"


class SolverResult:
    def __init__(self, problem: str, x_unit: np.ndarray, x: np.ndarray, t: np.ndarray, lam: np.ndarray,
                 alpha: np.ndarray, iterations: int, budget_used: int, budget: int, seed: int,
                 exhausted: bool = False, aborted: bool = False, diagnostic: str = "",
                 trace: Optional[List[TraceRecord]] = None, initial_gradient: Optional[np.ndarray] = None):
        self.problem = problem
        self.x_unit = x_unit
        self.x = x
        self.t = t
        self.lam = lam
        self.alpha = alpha
        self.iterations = iterations
        self.budget_used = budget_used
        self.budget = budget
        self.seed = seed
        self.exhausted = exhausted
        self.aborted = aborted
        self.diagnostic = diagnostic
        self.trace = trace
        self.initial_gradient = initial_gradient

    def __repr__(self):
        return f"SolverResult(problem={self.problem}, x={self.x.tolist()}, iterations={self.iterations}, " \
               f"budget_used={self.budget_used}, exhausted={self.exhausted}, aborted={self.aborted})"

    @property
    def completed(self) -> bool:
        return not self.exhausted and not self.aborted

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "x": self.x.tolist(),
            "x_unit": self.x_unit.tolist(),
            "t": self.t.tolist(),
            "lambda": self.lam.tolist(),
            "alpha": self.alpha.tolist(),
            "iterations": self.iterations,
            "budget_used": self.budget_used,
            "budget": self.budget,
            "seed": self.seed,
            "exhausted": self.exhausted,
            "aborted": self.aborted,
            "diagnostic": self.diagnostic,
        }


class Solver:
    """One run of the projected multi-timescale loop on a problem."""

    def __init__(self, problem: Problem, config: SolverConfig):
        self.__problem = problem
        self.__config = config
        self.__k_max = config.resolved_k_max()
        self.__gamma = config.resolved_gamma()
        self.__alpha_star = config.alpha_star_vector(problem.m)
        self.__kernel_x = SmoothingKernel(config.kernel, config.beta1)
        self.__kernel_t = SmoothingKernel(config.kernel, config.beta2)
        self.__x_box = Box.unit(problem.n)
        self.__t_box = Box.uniform(problem.m + 1, -config.t_max, config.t_max)
        self.__lam_box = Box.uniform(problem.m, 0.0, config.lambda_max) if problem.m > 0 else None
        self.__check_bounds = config.kernel == KernelKind.TRUNCATED
        self.__rng = np.random.default_rng(config.seed)
        self.__budget = EvaluationBudget(config.budget)

    @property
    def k_max(self) -> int:
        return self.__k_max

    @property
    def gamma(self) -> float:
        return self.__gamma

    @property
    def budget(self) -> EvaluationBudget:
        return self.__budget

    def _initial_x(self) -> np.ndarray:
        if self.__config.x0 is not None:
            x0 = np.asarray(self.__config.x0, dtype=float)
            if x0.shape != (self.__problem.n,):
                raise InvalidParamsException(f"x0 has {x0.size} entries, problem has {self.__problem.n}")
        else:
            x0 = self.__problem.unit_x0()
        return np.clip(x0, 0.0, 1.0)

    def _draw(self, state: LagrangeState) -> Tuple[Perturbation, Optional[Perturbation]]:
        u, mu_u = self.__kernel_x.draw(state.x, 0.0, 1.0, self.__rng)
        v, mu_v = self.__kernel_t.draw(state.t, self.__t_box.lower, self.__t_box.upper, self.__rng)
        backward = None
        if self.__config.estimator == Estimator.TWO_SIDED:
            u2, mu_u2 = self.__kernel_x.draw(state.x, 0.0, 1.0, self.__rng, reflected=True)
            v2, mu_v2 = self.__kernel_t.draw(state.t, self.__t_box.lower, self.__t_box.upper, self.__rng,
                                             reflected=True)
            backward = Perturbation(u2, v2, mu_u2, mu_v2, np.empty(0))
        return Perturbation(u, v, mu_u, mu_v, np.empty(0)), backward

    def _noise(self, x_design: np.ndarray, x_eval: np.ndarray) -> np.ndarray:
        box = self.__problem.box
        return self.__problem.sample(self.__rng, box.scale(x_design), box.scale(x_eval))

    def _gradient(self, state: LagrangeState, alpha: np.ndarray) -> StackedGradient:
        """One stacked gradient; a non-finite output triggers one redraw of the noise."""
        beta1 = self.__config.beta1
        forward, backward = self._draw(state)
        for attempt in range(2):
            xi1 = self._noise(state.x, state.x + beta1 * forward.u)
            xi2 = self._noise(state.x, state.x)
            if backward is not None:
                backward.xi = self._noise(state.x, state.x - beta1 * backward.u)
            try:
                return stacked_gradient(self.__problem, state, forward.u, forward.v, forward.mu_u, forward.mu_v,
                                        beta1, self.__config.beta2, xi1, xi2, alpha,
                                        budget=self.__budget,
                                        strict_two_eval=self.__config.strict_two_eval,
                                        check_bounds=self.__check_bounds,
                                        backward=backward)
            except EvaluationException as e:
                if attempt == 1:
                    raise
                logger.warning(f"{self.__problem.name}: {e.message}, resampling noise")

    def _check(self, state: SolverState):
        if not state.lagrange.is_admissible(self.__config.t_max, self.__config.lambda_max):
            raise InvalidStateException(f"Iterate left its box at k={state.k}: {state.lagrange}")
        if (state.V < 0).any():
            raise InvalidStateException(f"Negative second moment at k={state.k}")
        if (state.alpha > self.__alpha_star).any() or (state.alpha < 0).any():
            raise InvalidStateException(f"Risk level out of range at k={state.k}: {state.alpha}")

    def _steps(self, k: int) -> List[float]:
        return [step_size(s, k) for s in self.__config.schedules]

    def _advance(self, state: SolverState, g: StackedGradient, k: int) -> List[float]:
        n, m = self.__problem.n, self.__problem.m
        s1, s2, s3, s4 = self._steps(k)
        eps = self.__config.epsilon
        state.M, state.V = update_moments(state.M, state.V, g.flatten(), s4)
        lagrange = state.lagrange
        t_slice = slice(n, n + m + 1)
        lam_slice = slice(n + m + 1, n + 2 * m + 1)
        lagrange.t = projected_update(lagrange.t, state.M[t_slice], state.V[t_slice], s3, eps, self.__t_box,
                                      Direction.DESCENT)
        lagrange.x = projected_update(lagrange.x, state.M[:n], state.V[:n], s2, eps, self.__x_box,
                                      Direction.DESCENT)
        if m > 0:
            lagrange.lam = projected_update(lagrange.lam, state.M[lam_slice], state.V[lam_slice], s1, eps,
                                            self.__lam_box, Direction.ASCENT)
        state.alpha = alpha_step(state.alpha, self.__alpha_star, self.__gamma)
        state.k = k + 1
        return [s1, s2, s3, s4]

    def run(self) -> SolverResult:
        problem, config = self.__problem, self.__config
        logger.info(f"Solving {problem.name} with {config.kernel} kernel, k_max={self.__k_max}, "
                    f"budget={config.budget}, seed={config.seed}")
        lagrange = LagrangeState.initial(self._initial_x(), problem.m)
        alpha = np.zeros(problem.m + 1)
        trace = None
        if config.trace:
            trace = deque(maxlen=config.trace_size) if config.trace_size else []
        state = None
        initial_gradient = None
        exhausted = aborted = False
        diagnostic = ""
        try:
            g = self._gradient(lagrange, alpha)
            initial_gradient = g.flatten()
            state = SolverState(lagrange, initial_gradient, initial_gradient ** 2, alpha)
            for k in range(self.__k_max):
                g = self._gradient(state.lagrange, state.alpha)
                steps = self._advance(state, g, k)
                if config.debug:
                    self._check(state)
                if trace is not None:
                    trace.append(TraceRecord(k, state.x, state.t, state.lam, state.alpha, steps, state.M,
                                             state.V, g.flatten()))
                if (k + 1) % config.log_every == 0:
                    logger.debug(f"k={k + 1} x={state.x.tolist()} t={state.t.tolist()} lam={state.lam.tolist()}")
        except BudgetExhaustedException as e:
            exhausted = True
            diagnostic = e.message
            logger.warning(f"{problem.name}: {e.message}, returning partial result")
        except EvaluationException as e:
            aborted = True
            diagnostic = f"evaluation failed twice at output {e.index}: {e.message}"
            logger.error(f"{problem.name}: run aborted, {diagnostic}")

        if state is None:
            state = SolverState(lagrange, np.zeros(0), np.zeros(0), alpha)
        result = SolverResult(
            problem=problem.name,
            x_unit=state.x.copy(),
            x=problem.box.scale(state.x),
            t=state.t.copy(),
            lam=state.lam.copy(),
            alpha=state.alpha.copy(),
            iterations=state.k,
            budget_used=self.__budget.calls_used,
            budget=config.budget,
            seed=config.seed,
            exhausted=exhausted,
            aborted=aborted,
            diagnostic=diagnostic,
            trace=list(trace) if trace is not None else None,
            initial_gradient=initial_gradient,
        )
        logger.info(f"Finished {problem.name}: {result.iterations} iterations, {result.budget_used} evaluations")
        return result


def run(problem: Problem, config: SolverConfig) -> SolverResult:
    return Solver(problem, config).run()


def write_trace(result: SolverResult, fp: IO[str]):
    if result.trace is None:
        raise InvalidParamsException("Result carries no trace; run with trace enabled")
    if not result.trace:
        return
    first = result.trace[0]
    header = ["k"] + [f"x_{i + 1}" for i in range(first.x.size)] \
        + [f"t_{j}" for j in range(first.t.size)] \
        + [f"lambda_{j + 1}" for j in range(first.lam.size)] \
        + [f"alpha_{j}" for j in range(first.alpha.size)] \
        + [f"s_{i + 1}" for i in range(len(first.steps))]
    writer = csv.writer(fp)
    writer.writerow(header)
    for r in result.trace:
        writer.writerow([r.k] + [repr(float(v)) for v in np.concatenate([r.x, r.t, r.lam, r.alpha, r.steps])])
