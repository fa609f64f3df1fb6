import json
import sys
from typing import Sequence

import numpy as np


def pprint(data, file=None):
    file = file or sys.stdout
    if isinstance(data, dict):
        print(json.dumps(data, indent=4, default=_to_builtin), file=file)
    else:
        print(data, file=file)


def _to_builtin(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def print_progress(done: int, total: int, label: str = "runs", width: int = 40, file=None):
    """Single-line progress bar on stderr, finished with a newline once done == total."""
    file = file or sys.stderr
    ratio = done / total if total > 0 else 1.0
    filled = int(round(width * ratio))
    file.write(f"\r{label} |{'#' * filled}{'-' * (width - filled)}| {100 * ratio:5.1f}% {done}/{total}")
    if done >= total:
        file.write("\n")
    file.flush()


def format_float(value: float, digits: int = 6) -> str:
    return f"{value:.{digits}g}"


def format_vector(values: Sequence[float], digits: int = 6) -> str:
    return "(" + ", ".join(format_float(float(v), digits) for v in values) + ")"
