import numpy as np
import pytest

from cvar_bbo.blackbox import Box, Problem


def _tan3(value):
    # arctan(cbrt(tan(v) ** 3)) == v on (-pi/2, pi/2), so the transformed output is exactly v
    return np.tan(value) ** 3


@pytest.fixture
def linear_problem():
    """Transformed objective a * x + offset on [0, 1]; every constraint is the constant raw value -1."""
    def make(a: float = 1.0, m: int = 0, x0: float = 0.5, offset: float = 0.0) -> Problem:
        def evaluator(x, xi):
            return np.array([_tan3(a * x[0] + offset)] + [-1.0] * m)
        return Problem("linear", Box.unit(1), [x0], m, evaluator)
    return make


@pytest.fixture
def quadratic_problem():
    """Transformed objective (x - 0.6)^2 + 0.5 on [0, 1], no constraints."""
    def evaluator(x, xi):
        return np.array([_tan3((x[0] - 0.6) ** 2 + 0.5)])
    return Problem("quadratic", Box.unit(1), [0.4], 0, evaluator)


@pytest.fixture
def constant_problem():
    def evaluator(x, xi):
        return np.array([1.0, -1.0])
    return Problem("constant", Box.unit(2), [0.5, 0.5], 1, evaluator)
