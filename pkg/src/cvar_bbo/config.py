from __future__ import annotations

import copy
import importlib
import os
from typing import IO, Optional

import yaml

from cvar_bbo.blackbox import Box, Problem
from cvar_bbo.problems import builtin_problem
from cvar_bbo.ramsa import SolverConfig
from cvar_bbo.smoothing import KernelKind
from cvar_bbo.types.exception import IllegalFormatException, NotFoundException
from cvar_bbo.types.uncertainty import UncertaintyModel

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
DEFAULTS_FILE = os.path.join(DATA_DIR, "defaults.yaml")
PRESETS_FILE = os.path.join(DATA_DIR, "presets.yaml")


def _read_yaml(path: str) -> dict:
    with open(path) as f:
        values = yaml.safe_load(f)
    return values if values is not None else {}


def load_defaults() -> dict:
    return _read_yaml(DEFAULTS_FILE)


def _merge(defaults: dict, values: dict, where: str) -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in values.items():
        if key not in defaults:
            raise IllegalFormatException(f"Unknown key '{key}' in {where}")
        merged[key] = value
    return merged


def resolve_evaluator(spec: str):
    """Imports `module:function`."""
    module_name, sep, attr = spec.partition(":")
    if not sep or not module_name or not attr:
        raise IllegalFormatException(f"Invalid evaluator '{spec}': expected 'module:function'")
    try:
        return getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as e:
        raise NotFoundException(f"Cannot load evaluator '{spec}': {e}")


class RunConfig:
    SECTIONS = ("problem", "solver", "trial", "tuning")

    def __init__(self, problem: dict, solver: SolverConfig, trial: dict, tuning: dict):
        self.problem = problem
        self.solver = solver
        self.trial = trial
        self.tuning = tuning

    def __repr__(self):
        return f"RunConfig(problem={self.problem.get('name')}, solver={self.solver})"

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.to_dict() == other.to_dict()

    def build_problem(self) -> Problem:
        p = self.problem
        if not p.get("evaluator"):
            return builtin_problem(p["name"])
        if p.get("bounds") is None or p.get("x0") is None or p.get("m") is None:
            raise IllegalFormatException("A custom problem needs bounds, x0 and m")
        return Problem(
            name=p["name"],
            box=Box.from_dict(p["bounds"]),
            x0=p["x0"],
            m=p["m"],
            evaluator=resolve_evaluator(p["evaluator"]),
            uncertainty=UncertaintyModel.from_list(p.get("uncertainty") or []),
            vectorized=bool(p.get("vectorized")),
        )

    def with_preset(self, name: str, kernel: Optional[KernelKind] = None) -> RunConfig:
        kernel = kernel if kernel is not None else self.solver.kernel
        overrides = preset(name, kernel)
        values = self.to_dict()
        values["solver"].update(overrides)
        values["solver"]["kernel"] = kernel.value
        return RunConfig.from_dict(values)

    def to_dict(self) -> dict:
        return {
            "problem": copy.deepcopy(self.problem),
            "solver": self.solver.to_dict(),
            "trial": copy.deepcopy(self.trial),
            "tuning": copy.deepcopy(self.tuning),
        }

    @staticmethod
    def from_dict(values: Optional[dict]) -> RunConfig:
        values = values or {}
        if not isinstance(values, dict):
            raise IllegalFormatException("Config must be a mapping of sections")
        unknown = set(values) - set(RunConfig.SECTIONS)
        if unknown:
            raise IllegalFormatException(f"Unknown config sections: {', '.join(sorted(unknown))}")
        defaults = load_defaults()
        sections = {}
        for name in RunConfig.SECTIONS:
            section = values.get(name) or {}
            if not isinstance(section, dict):
                raise IllegalFormatException(f"Section '{name}' must be a mapping")
            sections[name] = _merge(defaults[name], section, f"section '{name}'")
        return RunConfig(sections["problem"], SolverConfig.from_dict(sections["solver"]),
                         sections["trial"], sections["tuning"])


def load_config(fp: IO[str]) -> RunConfig:
    try:
        values = yaml.safe_load(fp)
    except yaml.YAMLError as e:
        raise IllegalFormatException(f"Invalid YAML config: {e}")
    return RunConfig.from_dict(values)


def dump_config(config: RunConfig, fp: IO[str]):
    yaml.safe_dump(config.to_dict(), fp, sort_keys=False, default_flow_style=None)


def preset(name: str, kernel: KernelKind = KernelKind.GAUSSIAN) -> dict:
    """Published solver hyperparameters for a builtin problem and kernel."""
    rows = _read_yaml(PRESETS_FILE).get(kernel.value, {})
    for key, row in rows.items():
        if key.lower() == name.lower():
            return dict(row)
    raise NotFoundException(f"No published {kernel.value} row for '{name}'. Available: {', '.join(rows)}")
