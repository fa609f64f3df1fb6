import csv
import sys
from functools import wraps
from typing import IO, Optional

import numpy as np
from prettytable import PrettyTable

from cvar_bbo import ramsa
from cvar_bbo.blackbox import Problem
from cvar_bbo.config import RunConfig, dump_config, load_config
from cvar_bbo.problems import BUILTIN_PROBLEMS, builtin_problem
from cvar_bbo.smoothing import KernelKind
from cvar_bbo.tuning import TuneReport, tune
from cvar_bbo.types.exception import IllegalFormatException, InvalidParamsException, TuningException
from cvar_bbo.utils import format_float, format_vector, pprint, print_progress
from cvar_bbo.validation import (
    EpistemicGrid,
    EpistemicReport,
    FeasibilityReport,
    TrialReport,
    compare_estimators,
    mc_feasibility,
    run_trial,
    verify_epistemic_points,
    worst_case_epistemic,
    write_trials_csv,
)


def run_config(f):
    """Resolves the run configuration: defaults, --config file, --preset, then explicit flags."""
    @wraps(f)
    def wrapper(args):
        fp = args.get("config")
        config = load_config(fp) if fp is not None else RunConfig.from_dict({})
        values = config.to_dict()
        if args.get("problem") is not None:
            values["problem"]["name"] = args["problem"]
        config = RunConfig.from_dict(values)

        kernel = args.get("kernel")
        if args.get("preset") is not None:
            config = config.with_preset(args["preset"], kernel)

        overrides = {}
        if kernel is not None:
            overrides["kernel"] = kernel.value
        for key in ("budget", "seed"):
            if args.get(key) is not None:
                overrides[key] = args[key]
        if args.get("trace") is not None:
            overrides["trace"] = True
        if overrides:
            config = RunConfig(config.problem, config.solver.copy(**overrides), config.trial, config.tuning)
        return f(args, config.build_problem(), config)

    return wrapper


def kernel_problem(problem: Problem, config: RunConfig) -> Problem:
    """The truncated kernel runs on noise that keeps x + xi inside the box."""
    if config.solver.kernel == KernelKind.TRUNCATED and not problem.uncertainty.is_truncated:
        return problem.truncated()
    return problem


def _progress(iteration: int, total: int):
    print_progress(iteration, total)


def read_point(fp: IO[str]) -> np.ndarray:
    """First fully numeric row of a CSV file, original units."""
    for row in csv.reader(fp):
        cells = [c.strip() for c in row if c.strip()]
        if not cells:
            continue
        try:
            return np.array([float(c) for c in cells])
        except ValueError:
            continue
    raise IllegalFormatException(f"No numeric row in {getattr(fp, 'name', 'point file')}")


def _unit_point(args: dict, problem: Problem) -> np.ndarray:
    if args.get("point") is not None:
        x = read_point(args["point"])
    elif problem.reference is not None:
        x = problem.reference.x
    else:
        raise InvalidParamsException(f"{problem.name} has no reference point; pass --point")
    if x.shape != (problem.n,):
        raise InvalidParamsException(f"Point has {x.size} entries, {problem.name} has {problem.n}")
    if not problem.box.contains(x):
        raise InvalidParamsException(f"Point {x.tolist()} outside the bounds of {problem.name}")
    return problem.box.unscale(x)


def cmd_list(_args: dict):
    tab = PrettyTable()
    tab.field_names = ["Name", "n", "m", "d", "Description"]
    tab.align["Description"] = "l"
    for name in BUILTIN_PROBLEMS:
        p = builtin_problem(name)
        tab.add_row([p.name, p.n, p.m, p.d, p.description])
    print(tab)


def print_tune_report(report: TuneReport):
    tab = PrettyTable()
    tab.title = f"Average variance of {report.samples} gradient estimates ({report.problem}, {report.kernel})"
    tab.field_names = ["beta1", "Average variance"]
    for beta1, variance in zip(report.grid, report.avg_variance):
        tab.add_row([beta1, format_float(variance)])
    print(tab)
    summary = PrettyTable()
    summary.field_names = ["argmin beta1", "chosen beta1", "grad norm ratio", "coeff", "chosen s2", "evaluations"]
    summary.add_row([
        report.argmin_beta1,
        report.chosen_beta1,
        "-" if report.grad_norm_ratio is None else format_float(report.grad_norm_ratio),
        report.coeff,
        "-" if report.chosen_s2 is None else format_float(report.chosen_s2),
        report.evaluations,
    ])
    print(summary)


@run_config
def cmd_tune(args: dict, problem: Problem, config: RunConfig):
    kernel = config.solver.kernel
    problem = kernel_problem(problem, config)
    samples = args.get("samples") or config.tuning["samples"]
    try:
        report = tune(problem, grid=config.tuning["grid"], samples=samples, kernel=kernel,
                      seed=config.solver.seed, coeff=config.tuning["coeff"])
    except TuningException as e:
        if e.report is not None:
            print_tune_report(e.report)
        raise
    print_tune_report(report)

    tuned = RunConfig(config.problem, report.solver_config(config.solver), config.trial, config.tuning)
    out = args.get("out")
    if out is not None:
        dump_config(tuned, out)
        print(f"## Config written to {out.name}")
    else:
        print("## Config")
        dump_config(tuned, sys.stdout)


@run_config
def cmd_solve(args: dict, problem: Problem, config: RunConfig):
    problem = kernel_problem(problem, config)
    result = ramsa.run(problem, config.solver)

    tab = PrettyTable()
    tab.title = f"Solution of {problem.name}"
    tab.field_names = ["Variable", "x", "x (unit)"]
    for i in range(problem.n):
        tab.add_row([f"x_{i + 1}", format_float(result.x[i], 8), format_float(result.x_unit[i], 8)])
    print(tab)

    status = "completed" if result.completed else ("budget exhausted" if result.exhausted else "aborted")
    summary = PrettyTable()
    summary.field_names = ["Iterations", "Evaluations", "Budget", "Status"]
    summary.add_row([result.iterations, result.budget_used, result.budget, status])
    print(summary)
    print(f"t      = {format_vector(result.t)}")
    print(f"lambda = {format_vector(result.lam)}")
    print(f"alpha  = {format_vector(result.alpha)}")
    if result.diagnostic:
        print(f"## {result.diagnostic}")

    if args.get("mc"):
        print_feasibility(problem, mc_feasibility(problem, result.x_unit, args["mc"], config.solver.seed))
    if args.get("trace") is not None:
        ramsa.write_trace(result, args["trace"])
        print(f"## Trace written to {args['trace'].name}")


def print_feasibility(problem: Problem, report: FeasibilityReport):
    tab = PrettyTable()
    tab.title = f"Monte Carlo check of {problem.name} ({report.n_samples} samples)"
    tab.field_names = ["Constraint", "P(C <= 0)", "Std error"]
    for j, (p, se) in enumerate(zip(report.constraint_probs, report.std_errors)):
        tab.add_row([f"C_{j + 1}", format_float(p, 5), format_float(se, 3)])
    print(tab)
    pprint(f"Mean objective: {format_float(report.mean_objective, 8)}, failures: {report.n_failures}, "
           f"valid: {report.valid}, success: {report.success}")


def print_trial(problem: Problem, reports):
    tab = PrettyTable()
    tab.title = f"Average result over {len(reports[0][1].runs)} runs for {problem.name}"
    tab.field_names = ["Method", "Mean objective", "Min mean P(C <= 0)", "Successes", "Failed runs",
                       "Mean evaluations"]
    for label, report in reports:
        probs = report.mean_probs
        tab.add_row([label, format_float(report.mean_objective, 8),
                     format_float(float(np.min(probs)) if np.size(probs) else 1.0, 5),
                     report.success_count, report.failure_count, format_float(report.mean_evals)])
    if problem.reference is not None:
        ref = problem.reference
        tab.add_row([ref.method, format_float(ref.objective, 8), format_float(ref.probability, 5), "-", "-", "-"])
    print(tab)

    points = PrettyTable()
    points.field_names = ["Method"] + [f"x_{i + 1}" for i in range(problem.n)]
    for label, report in reports:
        mean, std = report.mean_point, report.std_point
        points.add_row([label] + [f"{format_float(m)} ± {format_float(s, 3)}" for m, s in zip(mean, std)])
    if problem.reference is not None:
        points.add_row([problem.reference.method] + [format_float(v) for v in problem.reference.x])
    print(points)


def _write_report(report: TrialReport, out: Optional[IO[str]]):
    if out is not None:
        report.write_csv(out)
        print(f"## Per-run results written to {out.name}")


@run_config
def cmd_trial(args: dict, problem: Problem, config: RunConfig):
    runs = args.get("runs") or config.trial["runs"]
    mc = args.get("mc") or config.trial["mc_samples"]
    jobs = args.get("jobs") or config.trial["jobs"]
    problem = kernel_problem(problem, config)
    report = run_trial(problem, config.solver, runs, mc_samples=mc, seed=config.solver.seed, jobs=jobs,
                       progress=_progress)
    print_trial(problem, [(f"{config.solver.kernel} kernel", report)])
    _write_report(report, args.get("out"))


@run_config
def cmd_validate(args: dict, problem: Problem, config: RunConfig):
    x_unit = _unit_point(args, problem)
    mc = args.get("mc") or config.trial["mc_samples"]
    print_feasibility(problem, mc_feasibility(problem, x_unit, mc, config.solver.seed))


def print_epistemic(problem: Problem, report: EpistemicReport):
    tab = PrettyTable()
    tab.title = f"Worst-case reliability of {problem.name}"
    tab.field_names = ["Constraint", "Means", "Nominal value", "P(C <= 0)"]
    for case in report.cases:
        value = "-" if np.isnan(case.value) else format_float(case.value)
        tab.add_row([f"C_{case.constraint}", format_vector(case.means, 4), value, format_float(case.probability, 5)])
    print(tab)
    pprint(f"Feasible: {report.feasible}")


@run_config
def cmd_epistemic(args: dict, problem: Problem, config: RunConfig):
    x_unit = _unit_point(args, problem)
    mc = args.get("mc") or config.trial["mc_samples"]
    if args["variant"] == "points":
        report = verify_epistemic_points(problem, x_unit, mc, config.solver.seed)
    else:
        grid = EpistemicGrid.of(problem, args["grid"])
        report = worst_case_epistemic(problem, x_unit, grid, mc, config.solver.seed)
    print_epistemic(problem, report)


@run_config
def cmd_compare(args: dict, problem: Problem, config: RunConfig):
    gaussian = config.with_preset(problem.name, KernelKind.GAUSSIAN).solver
    truncated = config.with_preset(problem.name, KernelKind.TRUNCATED).solver
    runs = args.get("runs") or config.trial["runs"]
    mc = args.get("mc") or config.trial["mc_samples"]
    jobs = args.get("jobs") or config.trial["jobs"]
    left, right = compare_estimators(problem, gaussian, truncated, runs, gaussian.budget, truncated.budget,
                                     mc_samples=mc, seed=config.solver.seed, jobs=jobs, progress=_progress)
    print_trial(problem, [(f"gaussian ({gaussian.budget} evals)", left),
                          (f"truncated ({truncated.budget} evals)", right)])
    out = args.get("out")
    if out is not None:
        write_trials_csv(out, [left, right])
        print(f"## Per-run results written to {out.name}")
