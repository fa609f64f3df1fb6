from __future__ import annotations

import csv
import itertools
import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, Dict, IO, List, Optional, Sequence, Tuple

import numpy as np

from cvar_bbo import ramsa
from cvar_bbo.blackbox import Problem
from cvar_bbo.ramsa import SolverConfig
from cvar_bbo.smoothing import KernelKind
from cvar_bbo.types.constants import (
    EPISTEMIC_GRID_RESOLUTION,
    MAX_FAILURE_RATE,
    MC_SAMPLES,
    SUCCESS_PROBABILITY,
)
from cvar_bbo.types.exception import CvarBboException, InvalidParamsException

logger = logging.getLogger(__name__)


class FeasibilityReport:
    def __init__(self, mean_objective: float, constraint_probs: Sequence[float], std_errors: Sequence[float],
                 n_samples: int, n_failures: int = 0, threshold: float = SUCCESS_PROBABILITY):
        self.mean_objective = float(mean_objective)
        self.constraint_probs = np.asarray(constraint_probs, dtype=float)
        self.std_errors = np.asarray(std_errors, dtype=float)
        self.n_samples = n_samples
        self.n_failures = n_failures
        self.threshold = threshold

    def __repr__(self):
        return f"FeasibilityReport(mean_objective={self.mean_objective}, " \
               f"constraint_probs={self.constraint_probs.tolist()}, success={self.success})"

    @property
    def valid(self) -> bool:
        return self.n_failures <= MAX_FAILURE_RATE * self.n_samples

    @property
    def min_prob(self) -> float:
        return float(self.constraint_probs.min()) if self.constraint_probs.size else 1.0

    @property
    def success(self) -> bool:
        return self.valid and bool((self.constraint_probs >= self.threshold).all())

    def to_dict(self) -> dict:
        return {
            "mean_objective": self.mean_objective,
            "constraint_probs": self.constraint_probs.tolist(),
            "std_errors": self.std_errors.tolist(),
            "n_samples": self.n_samples,
            "n_failures": self.n_failures,
            "valid": self.valid,
            "success": self.success,
        }


def mc_feasibility(problem: Problem, x_unit: np.ndarray, n_samples: int = MC_SAMPLES, seed: int = 0,
                   threshold: float = SUCCESS_PROBABILITY) -> FeasibilityReport:
    """Mean raw objective and empirical P(C_j <= 0) over fresh realizations at x.

    Rows with a non-finite output count as failures and are left out of every estimate.
    """
    x_unit = np.asarray(x_unit, dtype=float)
    if x_unit.shape != (problem.n,):
        raise InvalidParamsException(f"Point has {x_unit.size} entries, problem has {problem.n}")
    if not ((x_unit >= 0) & (x_unit <= 1)).all():
        raise InvalidParamsException(f"Point {x_unit.tolist()} outside the unit cube")
    if n_samples < 1:
        raise InvalidParamsException(f"Invalid sample count {n_samples}")
    rng = np.random.default_rng(seed)
    x = problem.box.scale(x_unit)
    xi = problem.sample(rng, x, size=n_samples)
    raw = problem.evaluate_batch(x, xi)
    ok = np.isfinite(raw).all(axis=1)
    n_ok = int(ok.sum())
    failures = n_samples - n_ok
    if failures:
        logger.warning(f"{problem.name}: {failures} of {n_samples} evaluations failed")
    if n_ok == 0:
        return FeasibilityReport(np.nan, np.zeros(problem.m), np.zeros(problem.m), n_samples, failures, threshold)
    rows = raw[ok]
    probs = (rows[:, 1:] <= 0.0).mean(axis=0)
    std_errors = np.sqrt(probs * (1.0 - probs) / n_ok)
    return FeasibilityReport(rows[:, 0].mean(), probs, std_errors, n_samples, failures, threshold)


class EpistemicGrid:
    """Tensor grid over the intervals of the epistemic means."""

    def __init__(self, lower: Sequence[float], upper: Sequence[float],
                 resolution: int = EPISTEMIC_GRID_RESOLUTION):
        self.lower = np.asarray(lower, dtype=float).reshape(-1)
        self.upper = np.asarray(upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape or (self.lower > self.upper).any():
            raise InvalidParamsException(f"Invalid epistemic box lower={self.lower} upper={self.upper}")
        if resolution < 2:
            raise InvalidParamsException(f"Grid resolution must be at least 2, got {resolution}")
        self.resolution = resolution

    def __repr__(self):
        return f"EpistemicGrid(lower={self.lower.tolist()}, upper={self.upper.tolist()}, " \
               f"resolution={self.resolution})"

    def axes(self) -> List[np.ndarray]:
        return [np.linspace(lo, hi, self.resolution) for lo, hi in zip(self.lower, self.upper)]

    def points(self) -> np.ndarray:
        """All grid points, last axis varying fastest."""
        return np.array(list(itertools.product(*self.axes())))

    @staticmethod
    def of(problem: Problem, resolution: int = EPISTEMIC_GRID_RESOLUTION) -> EpistemicGrid:
        if not problem.epistemic:
            raise InvalidParamsException(f"{problem.name} has no epistemic parameters")
        return EpistemicGrid([e.lower for e in problem.epistemic], [e.upper for e in problem.epistemic],
                             resolution)


class WorstCase:
    def __init__(self, constraint: int, means: Tuple[float, ...], value: float, probability: float):
        self.constraint = constraint
        self.means = means
        self.value = value
        self.probability = probability

    def __repr__(self):
        return f"WorstCase(constraint={self.constraint}, means={self.means}, probability={self.probability})"


class EpistemicReport:
    def __init__(self, cases: List[WorstCase], reports: Dict[Tuple[float, ...], FeasibilityReport],
                 threshold: float = SUCCESS_PROBABILITY):
        self.cases = cases
        self.reports = reports
        self.threshold = threshold

    def __repr__(self):
        return f"EpistemicReport(feasible={self.feasible}, cases={self.cases})"

    @property
    def feasible(self) -> bool:
        return all(r.success for r in self.reports.values())

    @property
    def min_probability(self) -> float:
        return min((c.probability for c in self.cases), default=1.0)


def _means(problem: Problem, values: Sequence[float]) -> Dict[int, float]:
    return {e.index: float(v) for e, v in zip(problem.epistemic, values)}


def worst_case_epistemic(problem: Problem, x_unit: np.ndarray, grid: Optional[EpistemicGrid] = None,
                         mc_samples: int = MC_SAMPLES, seed: int = 0) -> EpistemicReport:
    """Maximize each nominal constraint over the epistemic grid, then check reliability at every argmax."""
    grid = grid if grid is not None else EpistemicGrid.of(problem)
    if grid.lower.size != len(problem.epistemic):
        raise InvalidParamsException(f"Grid has {grid.lower.size} axes, problem has {len(problem.epistemic)}")
    x_unit = np.asarray(x_unit, dtype=float)
    x = problem.box.scale(x_unit)
    points = grid.points()
    values = np.array([problem.evaluate(x, problem.with_means(_means(problem, p)).uncertainty.nominal(x))
                       for p in points])

    cases = []
    reports: Dict[Tuple[float, ...], FeasibilityReport] = {}
    for j in range(1, problem.m + 1):
        best = int(np.argmax(values[:, j]))
        means = tuple(float(v) for v in points[best])
        if means not in reports:
            reports[means] = mc_feasibility(problem.with_means(_means(problem, means)), x_unit, mc_samples, seed)
        cases.append(WorstCase(j, means, float(values[best, j]), float(reports[means].constraint_probs[j - 1])))
    return EpistemicReport(cases, reports)


def verify_epistemic_points(problem: Problem, x_unit: np.ndarray, mc_samples: int = MC_SAMPLES,
                            seed: int = 0) -> EpistemicReport:
    """Check reliability at every combination of the admissible mean values."""
    if not problem.epistemic:
        raise InvalidParamsException(f"{problem.name} has no epistemic parameters")
    x_unit = np.asarray(x_unit, dtype=float)
    reports = {}
    for combo in itertools.product(*(e.points for e in problem.epistemic)):
        reports[combo] = mc_feasibility(problem.with_means(_means(problem, combo)), x_unit, mc_samples, seed)
    cases = []
    for j in range(1, problem.m + 1):
        means, report = min(reports.items(), key=lambda item: item[1].constraint_probs[j - 1])
        cases.append(WorstCase(j, means, np.nan, float(report.constraint_probs[j - 1])))
    return EpistemicReport(cases, reports)


class RunRecord:
    def __init__(self, run_id: int, seed: int, mc_seed: int, x_unit: Optional[np.ndarray] = None,
                 x: Optional[np.ndarray] = None, feasibility: Optional[FeasibilityReport] = None,
                 evals: int = 0, iterations: int = 0, epistemic_feasible: Optional[bool] = None,
                 completed: bool = True, error: str = ""):
        self.run_id = run_id
        self.seed = seed
        self.mc_seed = mc_seed
        self.x_unit = x_unit
        self.x = x
        self.feasibility = feasibility
        self.evals = evals
        self.iterations = iterations
        self.epistemic_feasible = epistemic_feasible
        self.completed = completed
        self.error = error

    def __repr__(self):
        return f"RunRecord(run_id={self.run_id}, seed={self.seed}, success={self.success}, error={self.error})"

    @property
    def success(self) -> bool:
        if self.feasibility is None or self.error:
            return False
        if self.epistemic_feasible is not None:
            return self.epistemic_feasible
        return self.feasibility.success


class TrialReport:
    """Per-run records of one trial; every aggregate is computed from them."""

    def __init__(self, problem: str, kernel: str, runs: List[RunRecord], master_seed: int):
        self.problem = problem
        self.kernel = kernel
        self.runs = sorted(runs, key=lambda r: r.run_id)
        self.master_seed = master_seed

    def __repr__(self):
        return f"TrialReport(problem={self.problem}, runs={len(self.runs)}, successes={self.success_count})"

    def _solved(self) -> List[RunRecord]:
        return [r for r in self.runs if r.x is not None and r.feasibility is not None]

    @property
    def success_count(self) -> int:
        return sum(1 for r in self.runs if r.success)

    @property
    def failure_count(self) -> int:
        return sum(1 for r in self.runs if r.error)

    @property
    def mean_point(self) -> np.ndarray:
        return np.mean([r.x for r in self._solved()], axis=0)

    @property
    def std_point(self) -> np.ndarray:
        return np.std([r.x for r in self._solved()], axis=0)

    @property
    def mean_objective(self) -> float:
        return float(np.mean([r.feasibility.mean_objective for r in self._solved()]))

    @property
    def mean_probs(self) -> np.ndarray:
        return np.mean([r.feasibility.constraint_probs for r in self._solved()], axis=0)

    @property
    def mean_evals(self) -> float:
        return float(np.mean([r.evals for r in self.runs]))

    def _shape(self) -> Tuple[int, int]:
        solved = self._solved()
        if not solved:
            return 0, 0
        return solved[0].x.size, solved[0].feasibility.constraint_probs.size

    def _rows(self, n: int, m: int) -> List[list]:
        rows = []
        for r in self.runs:
            if r.x is None or r.feasibility is None:
                rows.append([r.run_id, r.seed, int(r.success), ""] + [""] * (m + n) + [r.evals])
                continue
            rows.append([r.run_id, r.seed, int(r.success), repr(r.feasibility.mean_objective)]
                        + [repr(float(p)) for p in r.feasibility.constraint_probs]
                        + [repr(float(v)) for v in r.x] + [r.evals])
        return rows

    def write_csv(self, fp: IO[str]):
        n, m = self._shape()
        writer = csv.writer(fp)
        writer.writerow(_csv_header(n, m))
        writer.writerows(self._rows(n, m))


def _csv_header(n: int, m: int) -> List[str]:
    return ["run_id", "seed", "success", "mean_obj"] + [f"prob_{j + 1}" for j in range(m)] \
        + [f"x_{i + 1}" for i in range(n)] + ["evals"]


def write_trials_csv(fp: IO[str], reports: Sequence[TrialReport]):
    """Several trials of one problem in one file, with a leading kernel column."""
    shapes = [r._shape() for r in reports if r._solved()]
    n, m = shapes[0] if shapes else (0, 0)
    writer = csv.writer(fp)
    writer.writerow(["kernel"] + _csv_header(n, m))
    for report in reports:
        writer.writerows([report.kernel] + row for row in report._rows(n, m))


def derive_seeds(master_seed: int, runs: int) -> List[Tuple[int, int]]:
    """(solver seed, Monte Carlo seed) per run, independent of how runs are scheduled."""
    children = np.random.SeedSequence(master_seed).spawn(runs)
    return [tuple(int(s) for s in child.generate_state(2)) for child in children]


def _epistemic_check(problem: Problem, x_unit: np.ndarray, mc_samples: int, seed: int) -> Optional[bool]:
    if not problem.epistemic:
        return None
    if all(e.discrete for e in problem.epistemic):
        return verify_epistemic_points(problem, x_unit, mc_samples, seed).feasible
    return worst_case_epistemic(problem, x_unit, mc_samples=mc_samples, seed=seed).feasible


def trial_run(problem: Problem, config: SolverConfig, run_id: int, seed: int, mc_seed: int,
              mc_samples: int) -> RunRecord:
    try:
        result = ramsa.run(problem, config.copy(seed=seed))
        feasibility = mc_feasibility(problem, result.x_unit, mc_samples, mc_seed)
        epistemic = _epistemic_check(problem, result.x_unit, mc_samples, mc_seed)
    except CvarBboException as e:
        logger.error(f"{problem.name} run {run_id} failed: {e}")
        return RunRecord(run_id, seed, mc_seed, completed=False, error=str(e))
    record = RunRecord(run_id, seed, mc_seed, result.x_unit, result.x, feasibility, result.budget_used,
                       result.iterations, epistemic, result.completed,
                       result.diagnostic if result.aborted else "")
    logger.info(f"{problem.name} run {run_id}: objective={feasibility.mean_objective:.6g} "
                f"min_prob={feasibility.min_prob:.4f} success={record.success}")
    return record


def run_trial(problem: Problem, config: SolverConfig, runs: int, budget_per_run: Optional[int] = None,
              mc_samples: int = MC_SAMPLES, seed: int = 0, jobs: Optional[int] = 1,
              progress: Optional[Callable[[int, int], None]] = None) -> TrialReport:
    """Independent seeded runs with one feasibility check each.

    Results do not depend on `jobs`; jobs=None uses every available core.
    """
    if runs < 1:
        raise InvalidParamsException(f"Invalid number of runs {runs}")
    if budget_per_run is not None:
        config = config.copy(budget=budget_per_run)
    seeds = derive_seeds(seed, runs)
    if jobs is None:
        jobs = os.cpu_count() or 1
    records = []
    if jobs <= 1 or runs == 1:
        for run_id, (solver_seed, mc_seed) in enumerate(seeds):
            records.append(trial_run(problem, config, run_id, solver_seed, mc_seed, mc_samples))
            if progress is not None:
                progress(len(records), runs)
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, runs)) as executor:
            futures = [executor.submit(trial_run, problem, config, run_id, solver_seed, mc_seed, mc_samples)
                       for run_id, (solver_seed, mc_seed) in enumerate(seeds)]
            for future in as_completed(futures):
                records.append(future.result())
                if progress is not None:
                    progress(len(records), runs)
    return TrialReport(problem.name, config.kernel.value, records, seed)


def compare_estimators(problem: Problem, gaussian: SolverConfig, truncated: SolverConfig, runs: int,
                       gaussian_budget: Optional[int] = None, truncated_budget: Optional[int] = None,
                       mc_samples: int = MC_SAMPLES, seed: int = 0, jobs: Optional[int] = 1,
                       progress: Optional[Callable[[int, int], None]] = None) -> Tuple[TrialReport, TrialReport]:
    """Same problem and seeds, Gaussian kernel against the truncated kernel on truncated noise."""
    gaussian = gaussian.copy(kernel=KernelKind.GAUSSIAN.value)
    truncated = truncated.copy(kernel=KernelKind.TRUNCATED.value)
    left = run_trial(problem, gaussian, runs, gaussian_budget, mc_samples, seed, jobs, progress)
    right = run_trial(problem.truncated(), truncated, runs, truncated_budget, mc_samples, seed, jobs, progress)
    return left, right
