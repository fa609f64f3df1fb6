import numpy as np
import pytest

from cvar_bbo.blackbox import Box, EvaluationBudget, Problem
from cvar_bbo.lagrangian import (
    LagrangeState,
    Perturbation,
    StackedGradient,
    lagrangian_value,
    noisy_lagrangian,
    stacked_gradient,
)
from cvar_bbo.types.exception import InvalidParamsException, OutOfBoundsException

NO_NOISE = np.zeros(0)


def _state(x=0.5, m=1):
    return LagrangeState(np.array([x]), np.zeros(m + 1), np.zeros(m))


def test_lagrangian_value():
    value = lagrangian_value(np.array([2.0, 0.5]), np.array([1.0, 0.0]), np.array([2.0]), np.array([0.0, 0.5]))
    assert value == pytest.approx(4.0)


def test_lagrangian_value_without_multipliers():
    outputs, t = np.array([0.3, 0.9]), np.array([0.1, 0.0])
    assert lagrangian_value(outputs, t, np.zeros(1), 0.5) == pytest.approx(0.1 + 0.2 / 0.5)


def test_lagrangian_value_slack():
    outputs, t = np.array([0.1, -0.5, -0.2]), np.array([0.2, 0.0, 0.3])
    assert lagrangian_value(outputs, t, np.ones(2), 0.9) == pytest.approx(t.sum())


def test_noisy_lagrangian(linear_problem):
    problem = linear_problem(a=1.0, m=1)
    budget = EvaluationBudget(1)
    value = noisy_lagrangian(problem, _state(0.5), NO_NOISE, 0.0, budget)
    assert value == pytest.approx(0.5)
    assert budget.calls_used == 1


def test_stacked_gradient_linear(linear_problem):
    problem = linear_problem(a=1.0, m=1)
    budget = EvaluationBudget(10)
    g = stacked_gradient(problem, _state(0.5), np.array([1.0]), np.array([0.5, 0.5]), 0.0, 0.0,
                         0.1, 1e-4, NO_NOISE, NO_NOISE, 0.0, budget)
    assert budget.calls_used == 2
    assert np.allclose(g.g_x, [1.0])
    assert np.allclose(g.g_t, [500.0, 500.0])
    # constraint -pi/4 lies below t_1 = 0
    assert np.allclose(g.g_lam, [0.0])


def test_stacked_gradient_without_t_perturbation(linear_problem):
    problem = linear_problem(a=0.8, m=0)
    state = LagrangeState(np.array([0.5]), np.zeros(1), np.zeros(0))
    g = stacked_gradient(problem, state, np.array([1.0]), np.zeros(1), 0.0, 0.0, 0.05, 1e-4,
                         NO_NOISE, NO_NOISE, 0.0)
    assert np.allclose(g.g_x, [0.8])
    assert g.g_lam.size == 0


def test_stacked_gradient_constant_problem(constant_problem):
    state = LagrangeState(np.array([0.5, 0.5]), np.zeros(2), np.zeros(1))
    g = stacked_gradient(constant_problem, state, np.array([0.3, -1.2]), np.array([0.4, 0.1]), 0.0, 0.0,
                         0.1, 1e-4, NO_NOISE, NO_NOISE, 0.0)
    assert np.allclose(g.g_x, 0.0)
    assert np.allclose(g.g_t, 0.0)


def test_stacked_gradient_lambda_part():
    def evaluator(x, xi):
        return np.array([x[0], 1.0])

    problem = Problem("active", Box.unit(1), [0.5], 1, evaluator)
    state = LagrangeState(np.array([0.5]), np.array([0.0, 0.2]), np.array([1.0]))
    alpha = np.array([0.0, 0.5])
    g = stacked_gradient(problem, state, np.array([0.0]), np.zeros(2), 0.0, 0.0, 0.1, 1e-4,
                         NO_NOISE, NO_NOISE, alpha)
    c1 = np.pi / 4
    assert np.allclose(g.g_lam, [0.2 + (c1 - 0.2) / 0.5])
    assert (g.g_lam >= state.t[1:]).all()


@pytest.mark.parametrize("strict, backward, calls", [(True, False, 2), (False, False, 3), (True, True, 3),
                                                     (False, True, 4)])
def test_stacked_gradient_calls(linear_problem, strict, backward, calls):
    problem = linear_problem(m=2)
    budget = EvaluationBudget(10)
    back = Perturbation(np.array([0.5]), np.zeros(3), 0.0, np.zeros(3), NO_NOISE) if backward else None
    stacked_gradient(problem, _state(0.5, m=2), np.array([1.0]), np.zeros(3), 0.0, 0.0, 0.1, 1e-4,
                     NO_NOISE, NO_NOISE, 0.0, budget, strict_two_eval=strict, backward=back)
    assert budget.calls_used == calls


def test_two_sided_gradient_linear(linear_problem):
    problem = linear_problem(a=1.0, m=1)
    back = Perturbation(np.array([1.0]), np.array([0.5, 0.5]), 0.0, np.zeros(2), NO_NOISE)
    g = stacked_gradient(problem, _state(0.5), np.array([1.0]), np.array([0.5, 0.5]), 0.0, 0.0,
                         0.1, 1e-4, NO_NOISE, NO_NOISE, 0.0, backward=back)
    assert np.allclose(g.g_x, [1.0])
    assert np.allclose(g.g_t, [500.0, 500.0])


def test_stacked_gradient_checks_bounds(linear_problem):
    problem = linear_problem(m=1)
    budget = EvaluationBudget(10)
    with pytest.raises(OutOfBoundsException):
        stacked_gradient(problem, _state(0.95), np.array([1.0]), np.zeros(2), 0.0, 0.0, 0.1, 1e-4,
                         NO_NOISE, NO_NOISE, 0.0, budget, check_bounds=True)
    assert budget.calls_used == 0


def test_stacked_gradient_flatten_round_trip():
    g = StackedGradient([1.0, 2.0], [3.0, 4.0, 5.0], [6.0, 7.0])
    flat = g.flatten()
    assert np.array_equal(flat, np.arange(1.0, 8.0))
    back = StackedGradient.from_flat(flat, 2, 2)
    assert np.array_equal(back.g_t, [3.0, 4.0, 5.0])
    with pytest.raises(InvalidParamsException):
        StackedGradient.from_flat(flat, 3, 2)


def test_lagrange_state():
    state = LagrangeState.initial(np.array([0.2, 0.8]), 3)
    assert (state.n, state.m) == (2, 3)
    assert state.is_admissible()
    state.lam[0] = -0.1
    assert not state.is_admissible()
    copy = state.copy()
    copy.x[0] = 0.9
    assert state.x[0] == 0.2
    with pytest.raises(InvalidParamsException):
        LagrangeState(np.zeros(1), np.zeros(2), np.zeros(2))
