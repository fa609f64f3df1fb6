import argparse
import io
import logging
import sys
from argparse import ArgumentParser
from typing import List, Optional

from cvar_bbo import commands
from cvar_bbo.problems import problem_names
from cvar_bbo.types.argparse_type import kernel_type, non_negative_num_type, positive_num_type
from cvar_bbo.types.exception import CvarBboException

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class Parser(ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def add_problem(subparser):
    subparser.add_argument("--problem", default=None, metavar="NAME",
                           help=f"builtin problem, one of {', '.join(problem_names())}")


def add_budget(subparser):
    subparser.add_argument("--budget", type=positive_num_type, default=None, help="blackbox evaluations per run")


def add_seed(subparser):
    subparser.add_argument("--seed", type=non_negative_num_type, default=None, help="master seed")


def add_config(subparser):
    subparser.add_argument("--config", type=argparse.FileType('r'), default=None, help="YAML run config")


def add_preset(subparser):
    subparser.add_argument("--preset", default=None, metavar="NAME",
                           help="use the published hyperparameters of a builtin problem")


def add_kernel(subparser):
    subparser.add_argument("--kernel", type=kernel_type, default=None, help="gaussian or truncated")


def add_trace(subparser):
    subparser.add_argument("--trace", type=argparse.FileType('w'), default=None,
                           help="write per-iteration trace CSV")


def add_samples(subparser):
    subparser.add_argument("--samples", type=positive_num_type, default=None,
                           help="gradient estimates per beta1 candidate")


def add_runs(subparser):
    subparser.add_argument("--runs", type=positive_num_type, default=None, help="independent runs")


def add_mc(subparser):
    subparser.add_argument("--mc", type=positive_num_type, default=None, help="Monte Carlo samples")


def add_out(subparser):
    subparser.add_argument("--out", type=argparse.FileType('w'), default=None, help="output file")


def add_point(subparser):
    subparser.add_argument("--point", type=argparse.FileType('r'), default=None,
                           help="CSV with the point in original units; defaults to the reference solution")


def add_variant(subparser):
    subparser.add_argument("--variant", choices=["points", "interval"], required=True,
                           help="epistemic model of the material means")


def add_grid(subparser):
    subparser.add_argument("--grid", type=positive_num_type, default=15, help="grid points per epistemic axis")


def add_jobs(subparser):
    subparser.add_argument("--jobs", type=positive_num_type, default=None,
                           help="parallel runs, defaults to the number of cores")


def add_verbose(subparser):
    subparser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logs")


parser = Parser(prog="cvar-bbo")
subparsers = parser.add_subparsers(dest="command", help="Command to execute")

cmds = [
    ("list", "list builtin problems", []),
    ("tune", "choose beta1 and the x step size from gradient statistics at x0",
     [add_problem, add_kernel, add_samples, add_seed, add_config, add_out]),
    ("solve", "run the solver once",
     [add_problem, add_budget, add_seed, add_config, add_preset, add_kernel, add_mc, add_trace]),
    ("trial", "independent runs with a Monte Carlo check of each solution",
     [add_problem, add_runs, add_budget, add_mc, add_seed, add_config, add_preset, add_kernel, add_jobs,
      add_out]),
    ("validate", "Monte Carlo reliability of a point", [add_problem, add_point, add_mc, add_seed, add_config]),
    ("epistemic", "worst-case reliability over uncertain material means",
     [add_variant, add_point, add_grid, add_mc, add_seed, add_config]),
    ("compare", "gaussian against truncated kernel with published hyperparameters",
     [add_problem, add_runs, add_mc, add_seed, add_config, add_jobs, add_out]),
]
for cmd in cmds:
    p = subparsers.add_parser(cmd[0], help=cmd[1])
    add_verbose(p)
    for add_arg_func in cmd[2]:
        add_arg_func(p)


def setup_logging(verbose: int):
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def close_files(args: dict):
    for value in args.values():
        if isinstance(value, io.IOBase) and value not in (sys.stdin, sys.stdout, sys.stderr):
            value.close()


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    if not args["command"]:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: no command given", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(args.get("verbose", 0))
    if args["command"] == "epistemic":
        args["problem"] = f"VSI-epistemic-{args['variant']}"

    func = getattr(commands, f"cmd_{args['command']}")
    try:
        func(args)
    except CvarBboException as e:
        print(f"{parser.prog}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        close_files(args)
    return 0


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
