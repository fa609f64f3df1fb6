from __future__ import annotations

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from cvar_bbo.types.exception import (
    BudgetExhaustedException,
    EvaluationException,
    InvalidParamsException,
    InvalidStateException,
    OutOfBoundsException,
)
from cvar_bbo.types.uncertainty import UncertaintyModel

logger = logging.getLogger(__name__)

# evaluator(x, xi) -> (c_0, ..., c_m) in original units; x has shape (n,), xi (d,) or (N, d)
Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


class Box:
    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise InvalidParamsException(f"Bound dimensions differ: {lower.size} != {upper.size}")
        if not np.isfinite(lower).all() or not np.isfinite(upper).all() or (lower >= upper).any():
            raise InvalidParamsException(f"Invalid box lower={lower} upper={upper}")
        self.__lower = lower
        self.__upper = upper

    def __repr__(self):
        return f"Box(lower={self.__lower.tolist()}, upper={self.__upper.tolist()})"

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.__lower, other.lower) \
            and np.array_equal(self.__upper, other.upper)

    @property
    def lower(self) -> np.ndarray:
        return self.__lower

    @property
    def upper(self) -> np.ndarray:
        return self.__upper

    @property
    def dim(self) -> int:
        return self.__lower.size

    @property
    def width(self) -> np.ndarray:
        return self.__upper - self.__lower

    def scale(self, x_unit: np.ndarray) -> np.ndarray:
        return self.__lower + np.asarray(x_unit, dtype=float) * self.width

    def unscale(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.__lower) / self.width

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(((x >= self.__lower) & (x <= self.__upper)).all())

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.__lower, self.__upper)

    def to_dict(self) -> dict:
        return {"lower": self.__lower.tolist(), "upper": self.__upper.tolist()}

    @staticmethod
    def from_dict(values: dict) -> Box:
        return Box(values["lower"], values["upper"])

    @staticmethod
    def unit(n: int) -> Box:
        return Box(np.zeros(n), np.ones(n))

    @staticmethod
    def uniform(n: int, lower: float, upper: float) -> Box:
        return Box(np.full(n, lower), np.full(n, upper))


class EpistemicParameter:
    """Uncertainty component whose mean is only known to lie in [lower, upper]."""

    def __init__(self, index: int, lower: float, upper: float, points: Optional[Sequence[float]] = None,
                 discrete: bool = False):
        if not lower < upper:
            raise InvalidParamsException(f"Invalid epistemic interval [{lower}, {upper}]")
        self.__index = index
        self.__lower = float(lower)
        self.__upper = float(upper)
        self.__points = tuple(float(p) for p in points) if points else (self.__lower, self.__upper)
        self.__discrete = discrete

    def __repr__(self):
        return f"EpistemicParameter(index={self.__index}, [{self.__lower}, {self.__upper}], points={self.__points})"

    @property
    def index(self) -> int:
        return self.__index

    @property
    def lower(self) -> float:
        return self.__lower

    @property
    def upper(self) -> float:
        return self.__upper

    @property
    def points(self) -> tuple:
        return self.__points

    @property
    def discrete(self) -> bool:
        """True when the mean takes only the listed points, False for the whole interval."""
        return self.__discrete


class ReferenceSolution:
    """Published solution of a builtin problem, original units."""

    def __init__(self, x: Sequence[float], objective: float, probability: float, method: str = ""):
        self.__x = np.asarray(x, dtype=float)
        self.__objective = objective
        self.__probability = probability
        self.__method = method

    def __repr__(self):
        return f"ReferenceSolution(x={self.__x.tolist()}, objective={self.__objective})"

    @property
    def x(self) -> np.ndarray:
        return self.__x

    @property
    def objective(self) -> float:
        return self.__objective

    @property
    def probability(self) -> float:
        return self.__probability

    @property
    def method(self) -> str:
        return self.__method


class Problem:
    """Blackbox with m constraints over a box.

    :param vectorized: evaluator accepts xi of shape (N, d) and returns (N, m+1)
    """

    def __init__(self, name: str, box: Box, x0: Sequence[float], m: int, evaluator: Evaluator,
                 uncertainty: Optional[UncertaintyModel] = None, vectorized: bool = False,
                 epistemic: Optional[List[EpistemicParameter]] = None,
                 reference: Optional[ReferenceSolution] = None, description: str = ""):
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (box.dim,):
            raise InvalidParamsException(f"x0 has {x0.size} entries, box has {box.dim}")
        if not box.contains(x0):
            raise InvalidParamsException(f"x0 {x0.tolist()} outside {box}")
        if m < 0:
            raise InvalidParamsException(f"Invalid number of constraints {m}")
        self.__name = name
        self.__box = box
        self.__x0 = x0
        self.__m = m
        self.__evaluator = evaluator
        self.__uncertainty = uncertainty if uncertainty is not None else UncertaintyModel([])
        self.__vectorized = vectorized
        self.__epistemic = list(epistemic) if epistemic else []
        self.__reference = reference
        self.__description = description

    def __repr__(self):
        return f"Problem(name={self.__name}, n={self.n}, m={self.__m}, d={self.d})"

    @property
    def name(self) -> str:
        return self.__name

    @property
    def box(self) -> Box:
        return self.__box

    @property
    def x0(self) -> np.ndarray:
        return self.__x0

    @property
    def n(self) -> int:
        return self.__box.dim

    @property
    def m(self) -> int:
        return self.__m

    @property
    def d(self) -> int:
        return self.__uncertainty.dim

    @property
    def uncertainty(self) -> UncertaintyModel:
        return self.__uncertainty

    @property
    def epistemic(self) -> List[EpistemicParameter]:
        return self.__epistemic

    @property
    def reference(self) -> Optional[ReferenceSolution]:
        return self.__reference

    @property
    def description(self) -> str:
        return self.__description

    def unit_x0(self) -> np.ndarray:
        return self.__box.unscale(self.__x0)

    def sample(self, rng: np.random.Generator, x: np.ndarray, x_eval: Optional[np.ndarray] = None,
               size: Optional[int] = None) -> np.ndarray:
        return self.__uncertainty.sample(rng, x, x_eval, size)

    def evaluate(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Raw outputs for one realization, shape (m+1,). Non-finite values are passed through."""
        with np.errstate(all="ignore"):
            out = np.asarray(self.__evaluator(np.asarray(x, dtype=float), np.asarray(xi, dtype=float)),
                             dtype=float).reshape(-1)
        if out.shape != (self.__m + 1,):
            raise InvalidStateException(f"{self.__name} returned {out.size} outputs, expected {self.__m + 1}")
        return out

    def evaluate_batch(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Raw outputs for a batch of realizations, shape (N, m+1)."""
        xi = np.asarray(xi, dtype=float)
        if xi.ndim != 2:
            raise InvalidParamsException(f"Expected a 2-D batch of realizations, got shape {xi.shape}")
        if not self.__vectorized:
            return np.array([self.evaluate(x, row) for row in xi]).reshape(len(xi), self.__m + 1)
        with np.errstate(all="ignore"):
            out = np.asarray(self.__evaluator(np.asarray(x, dtype=float), xi), dtype=float)
        if out.shape != (len(xi), self.__m + 1):
            raise InvalidStateException(f"{self.__name} returned shape {out.shape}, expected {(len(xi), self.__m + 1)}")
        return out

    def _derive(self, name: str, uncertainty: UncertaintyModel, epistemic=None) -> Problem:
        return Problem(name, self.__box, self.__x0, self.__m, self.__evaluator, uncertainty, self.__vectorized,
                       self.__epistemic if epistemic is None else epistemic, self.__reference, self.__description)

    def truncated(self) -> Problem:
        """Variant whose design-variable noise keeps x + xi inside the box."""
        return self._derive(self.__name, self.__uncertainty.truncated(self.__box.lower, self.__box.upper))

    def with_means(self, means: Dict[int, float]) -> Problem:
        """Variant with the given uncertainty components pinned to fixed means."""
        fixed = set(means)
        remaining = [e for e in self.__epistemic if e.index not in fixed]
        return self._derive(self.__name, self.__uncertainty.with_means(means), remaining)


class EvaluationBudget:
    def __init__(self, max_calls: int):
        if max_calls < 0:
            raise InvalidParamsException(f"Invalid budget {max_calls}")
        self.__max_calls = max_calls
        self.__calls_used = 0

    def __repr__(self):
        return f"EvaluationBudget({self.__calls_used}/{self.__max_calls})"

    @property
    def max_calls(self) -> int:
        return self.__max_calls

    @property
    def calls_used(self) -> int:
        return self.__calls_used

    @property
    def remaining(self) -> int:
        return self.__max_calls - self.__calls_used

    def consume(self, count: int = 1):
        if self.__calls_used + count > self.__max_calls:
            raise BudgetExhaustedException(f"Evaluation budget of {self.__max_calls} calls exhausted")
        self.__calls_used += count


def scale_to_box(x_unit: np.ndarray, box: Box) -> np.ndarray:
    """Maps unit coordinates to original units. Points outside the cube are mapped affinely."""
    x_unit = np.asarray(x_unit, dtype=float)
    if x_unit.shape[-1:] != (box.dim,):
        raise InvalidParamsException(f"Point of dimension {x_unit.shape[-1:]} does not match box of {box.dim}")
    return box.scale(x_unit)


def unscale_from_box(x: np.ndarray, box: Box) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (box.dim,):
        raise InvalidParamsException(f"Point of dimension {x.shape[-1:]} does not match box of {box.dim}")
    return box.unscale(x)


def output_transform(c):
    """arctan(cbrt(c)), mapping the real line onto (-pi/2, pi/2) monotonically."""
    arr = np.asarray(c, dtype=float)
    if np.isnan(arr).any():
        raise InvalidParamsException("Cannot transform NaN output")
    out = np.arctan(np.cbrt(arr))
    return float(out) if out.ndim == 0 else out


def _first_non_finite(out: np.ndarray) -> int:
    return int(np.flatnonzero(~np.isfinite(out))[0])


def evaluate_transformed(problem: Problem, x_unit: np.ndarray, xi: np.ndarray,
                         budget: Optional[EvaluationBudget] = None, check_bounds: bool = False) -> np.ndarray:
    """One blackbox call at unit coordinates, returning transformed outputs of shape (m+1,).

    Every call counts against `budget`, including calls whose outputs turn out non-finite.
    """
    x_unit = np.asarray(x_unit, dtype=float)
    if check_bounds and not ((x_unit >= 0.0) & (x_unit <= 1.0)).all():
        raise OutOfBoundsException(f"Query point {x_unit.tolist()} outside the unit cube")
    x = scale_to_box(x_unit, problem.box)
    if budget is not None:
        budget.consume()
    raw = problem.evaluate(x, xi)
    if not np.isfinite(raw).all():
        index = _first_non_finite(raw)
        raise EvaluationException(f"{problem.name} returned {raw[index]} for output {index}", index)
    return output_transform(raw)
