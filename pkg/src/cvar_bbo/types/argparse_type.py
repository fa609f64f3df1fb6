from argparse import ArgumentTypeError

from cvar_bbo.smoothing import KernelKind
from cvar_bbo.types.exception import InvalidParamsException


def num_type(string: str) -> int:
    try:
        value = int(string, 10)
    except ValueError:
        try:
            value = int(float(string))
            if value != float(string):
                raise ValueError
        except ValueError:
            raise ArgumentTypeError(f"Invalid integer value '{string}'")
    except TypeError as e:
        raise ArgumentTypeError(f'Invalid type. {e}')
    return value


def non_negative_num_type(string: str) -> int:
    value = num_type(string)
    if value < 0:
        raise ArgumentTypeError(f"Invalid non-negative number '{value}'")
    return value


def positive_num_type(string: str) -> int:
    value = num_type(string)
    if value <= 0:
        raise ArgumentTypeError(f"Invalid positive number '{value}'")
    return value


def kernel_type(string: str) -> KernelKind:
    try:
        return KernelKind.from_string(string)
    except InvalidParamsException:
        choices = ", ".join(k.value for k in KernelKind)
        raise ArgumentTypeError(f"Invalid kernel '{string}'. Choose one of {choices}")
