import io

import numpy as np
import pytest

from cvar_bbo.blackbox import Box, EpistemicParameter, Problem
from cvar_bbo.problems import builtin_problem
from cvar_bbo.ramsa import SolverConfig
from cvar_bbo.types.exception import InvalidParamsException
from cvar_bbo.types.uncertainty import Normal, UncertaintyModel, Uniform
from cvar_bbo.validation import (
    EpistemicGrid,
    FeasibilityReport,
    RunRecord,
    TrialReport,
    compare_estimators,
    derive_seeds,
    mc_feasibility,
    run_trial,
    trial_run,
    verify_epistemic_points,
    worst_case_epistemic,
    write_trials_csv,
)


def _shifted_problem(nan_above=None):
    def evaluator(x, xi):
        if nan_above is not None and xi[0] > nan_above:
            return np.array([x[0], np.nan, 0.0])
        return np.array([x[0], xi[0] - 1.0, xi[0] - 3.0])

    return Problem("shifted", Box.unit(1), [0.5], 2, evaluator, UncertaintyModel([Normal(0.0, 1.0)]))


def _epistemic_problem(offset, discrete=False):
    def evaluator(x, xi):
        return np.array([x[0], xi[0] - offset, xi[1] - xi[0] - offset])

    components = [Normal(Uniform(0.0, 1.0), 0.1), Normal(Uniform(0.0, 1.0), 0.1)]
    epistemic = [EpistemicParameter(0, 0.0, 1.0, discrete=discrete), EpistemicParameter(1, 0.0, 1.0, discrete=discrete)]
    return Problem("epistemic", Box.unit(1), [0.5], 2, evaluator, UncertaintyModel(components), epistemic=epistemic)


def test_mc_feasibility_probabilities():
    report = mc_feasibility(_shifted_problem(), np.array([0.25]), 100000, seed=1)
    assert report.mean_objective == pytest.approx(0.25)
    assert report.constraint_probs[0] == pytest.approx(0.8413, abs=0.005)
    assert report.constraint_probs[1] == pytest.approx(0.99865, abs=0.001)
    assert report.min_prob == report.constraint_probs[0]
    assert report.valid
    assert not report.success
    assert (report.std_errors > 0).all()
    assert report.n_samples == 100000


def test_mc_feasibility_reproducible():
    first = mc_feasibility(_shifted_problem(), np.array([0.5]), 2000, seed=3)
    second = mc_feasibility(_shifted_problem(), np.array([0.5]), 2000, seed=3)
    assert first.to_dict() == second.to_dict()


def test_mc_feasibility_failures_within_tolerance():
    report = mc_feasibility(_shifted_problem(nan_above=2.5), np.array([0.5]), 100000, seed=2)
    assert 0 < report.n_failures < 1000
    assert report.valid


def test_mc_feasibility_too_many_failures():
    report = mc_feasibility(_shifted_problem(nan_above=2.0), np.array([0.5]), 100000, seed=2)
    assert report.n_failures > 1000
    assert not report.valid
    assert not report.success


@pytest.mark.parametrize("x", [[1.5], [-0.1], [0.2, 0.3]])
def test_mc_feasibility_invalid_point(x):
    with pytest.raises(InvalidParamsException):
        mc_feasibility(_shifted_problem(), np.array(x), 100)


def test_feasibility_report_threshold():
    report = FeasibilityReport(1.0, [0.995, 0.99], [0.0, 0.0], 1000)
    assert report.success
    assert not FeasibilityReport(1.0, [0.995, 0.98], [0.0, 0.0], 1000).success
    assert FeasibilityReport(1.0, [], [], 10).min_prob == 1.0


def test_epistemic_grid():
    grid = EpistemicGrid([0.0, 0.0], [1.0, 1.0], 3)
    points = grid.points()
    assert points.shape == (9, 2)
    assert np.allclose(points[0], [0.0, 0.0])
    assert np.allclose(points[1], [0.0, 0.5])
    assert np.allclose(points[-1], [1.0, 1.0])
    with pytest.raises(InvalidParamsException):
        EpistemicGrid([0.0], [1.0], 1)
    with pytest.raises(InvalidParamsException):
        EpistemicGrid([1.0], [0.0])


def test_epistemic_grid_of_problem():
    grid = EpistemicGrid.of(builtin_problem("VSI-epistemic-interval"), 5)
    assert np.allclose(grid.lower, [0.192, 0.192])
    assert np.allclose(grid.upper, [0.345, 0.345])
    with pytest.raises(InvalidParamsException):
        EpistemicGrid.of(builtin_problem("SCD"))


def test_worst_case_epistemic_feasible():
    report = worst_case_epistemic(_epistemic_problem(1.5), np.array([0.5]), EpistemicGrid([0, 0], [1, 1], 3),
                                  mc_samples=20000, seed=0)
    assert [c.constraint for c in report.cases] == [1, 2]
    assert report.cases[0].means == (1.0, 0.0)
    assert report.cases[1].means == (0.0, 1.0)
    assert report.cases[0].value == pytest.approx(-0.5)
    assert report.cases[1].value == pytest.approx(-0.5)
    assert report.feasible
    assert report.min_probability > 0.99


def test_worst_case_epistemic_infeasible():
    report = worst_case_epistemic(_epistemic_problem(0.8), np.array([0.5]), EpistemicGrid([0, 0], [1, 1], 3),
                                  mc_samples=20000, seed=0)
    assert not report.feasible
    # N(0.2, 0.1) and N(0.2, sqrt(0.02)) below zero
    assert report.cases[0].probability == pytest.approx(0.0228, abs=0.01)
    assert report.cases[1].probability == pytest.approx(0.0787, abs=0.01)
    assert report.min_probability == report.cases[0].probability


def test_worst_case_grid_mismatch():
    with pytest.raises(InvalidParamsException):
        worst_case_epistemic(_epistemic_problem(1.5), np.array([0.5]), EpistemicGrid([0.0], [1.0], 3))


def test_verify_epistemic_points():
    report = verify_epistemic_points(_epistemic_problem(1.5, discrete=True), np.array([0.5]), 20000, seed=0)
    assert set(report.reports) == {(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)}
    assert report.feasible
    failing = verify_epistemic_points(_epistemic_problem(0.8, discrete=True), np.array([0.5]), 20000, seed=0)
    assert not failing.feasible
    with pytest.raises(InvalidParamsException):
        verify_epistemic_points(_shifted_problem(), np.array([0.5]), 100)


def test_derive_seeds():
    seeds = derive_seeds(7, 5)
    assert seeds == derive_seeds(7, 5)
    assert derive_seeds(7, 3) == seeds[:3]
    assert len({s for pair in seeds for s in pair}) == 10
    assert derive_seeds(8, 5) != seeds


def _record(run_id, x, probs, evals=100, error=""):
    feasibility = FeasibilityReport(float(sum(x)), probs, [0.0] * len(probs), 1000)
    return RunRecord(run_id, run_id + 10, run_id + 20, np.asarray(x), np.asarray(x), feasibility, evals,
                     evals // 2, error=error)


def test_trial_report_aggregates():
    runs = [
        _record(1, [1.0, 3.0], [0.995, 1.0]),
        _record(0, [3.0, 5.0], [0.98, 1.0], evals=200),
        RunRecord(2, 12, 22, completed=False, error="boom"),
    ]
    report = TrialReport("p", "gaussian", runs, 0)
    assert [r.run_id for r in report.runs] == [0, 1, 2]
    assert report.success_count == 1
    assert report.failure_count == 1
    assert np.allclose(report.mean_point, [2.0, 4.0])
    assert np.allclose(report.std_point, [1.0, 1.0])
    assert report.mean_objective == pytest.approx(6.0)
    assert np.allclose(report.mean_probs, [0.9875, 1.0])
    assert report.mean_evals == pytest.approx(100.0)


def test_trial_report_csv():
    report = TrialReport("p", "gaussian", [_record(0, [0.5], [0.999]), RunRecord(1, 11, 21, error="x")], 0)
    out = io.StringIO()
    report.write_csv(out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "run_id,seed,success,mean_obj,prob_1,x_1,evals"
    assert lines[1].startswith("0,10,1,0.5,0.999,0.5,")
    assert lines[2] == "1,11,0,,,,0"


def test_write_trials_csv_labels_each_kernel():
    left = TrialReport("p", "gaussian", [RunRecord(0, 10, 20, error="x")], 0)
    right = TrialReport("p", "truncated", [_record(0, [0.5], [0.999])], 0)
    out = io.StringIO()
    write_trials_csv(out, [left, right])
    lines = out.getvalue().splitlines()
    assert lines[0] == "kernel,run_id,seed,success,mean_obj,prob_1,x_1,evals"
    assert lines[1] == "gaussian,0,10,0,,,,0"
    assert lines[2].startswith("truncated,0,10,1,0.5,0.999,0.5,")
    assert len(lines) == 3


def test_run_record_epistemic_overrides():
    record = _record(0, [0.5], [1.0])
    assert record.success
    record.epistemic_feasible = False
    assert not record.success


def test_trial_run_captures_errors():
    problem = builtin_problem("SCD")
    record = trial_run(problem, SolverConfig(budget=100, x0=[0.5]), 0, 1, 2, 100)
    assert record.error
    assert not record.completed
    assert not record.success


def test_run_trial_independent_of_jobs():
    problem = builtin_problem("SCD")
    config = SolverConfig()
    calls = []
    serial = run_trial(problem, config, runs=3, budget_per_run=100, mc_samples=500, seed=4,
                       progress=lambda done, total: calls.append((done, total)))
    parallel = run_trial(problem, config, runs=3, budget_per_run=100, mc_samples=500, seed=4, jobs=2)
    assert calls == [(1, 3), (2, 3), (3, 3)]
    assert len(serial.runs) == 3
    for a, b in zip(serial.runs, parallel.runs):
        assert a.run_id == b.run_id
        assert a.seed == b.seed
        assert np.array_equal(a.x, b.x)
        assert a.feasibility.to_dict() == b.feasibility.to_dict()
        assert a.evals == 100


def test_run_trial_invalid_runs():
    with pytest.raises(InvalidParamsException):
        run_trial(builtin_problem("SCD"), SolverConfig(), runs=0)


def test_compare_estimators():
    problem = builtin_problem("SCD")
    gaussian, truncated = compare_estimators(problem, SolverConfig(), SolverConfig(), runs=2,
                                             gaussian_budget=100, truncated_budget=120, mc_samples=200, seed=1)
    assert gaussian.kernel == "gaussian"
    assert truncated.kernel == "truncated"
    assert [r.seed for r in gaussian.runs] == [r.seed for r in truncated.runs]
    assert all(r.evals == 100 for r in gaussian.runs)
    assert all(r.evals == 120 for r in truncated.runs)
