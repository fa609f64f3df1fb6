from argparse import ArgumentTypeError

import pytest

from cvar_bbo.smoothing import KernelKind
from cvar_bbo.types.argparse_type import kernel_type, non_negative_num_type, num_type, positive_num_type


@pytest.mark.parametrize("string, expected", [("10", 10), ("-3", -3), ("1e3", 1000), ("5.0", 5)])
def test_num_type(string, expected):
    assert num_type(string) == expected


@pytest.mark.parametrize("string", ["abc", "1.5", ""])
def test_num_type_invalid(string):
    with pytest.raises(ArgumentTypeError):
        num_type(string)


def test_sign_checks():
    assert non_negative_num_type("0") == 0
    assert positive_num_type("7") == 7
    with pytest.raises(ArgumentTypeError):
        non_negative_num_type("-1")
    with pytest.raises(ArgumentTypeError):
        positive_num_type("0")


def test_kernel_type():
    assert kernel_type("TRUNCATED") == KernelKind.TRUNCATED
    with pytest.raises(ArgumentTypeError):
        kernel_type("box")
