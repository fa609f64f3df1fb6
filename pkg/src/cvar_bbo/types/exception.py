from enum import IntEnum, unique
from typing import Optional


@unique
class ExceptionCode(IntEnum):
    OK = 0
    SYSTEM_ERROR = 1
    NOT_FOUND = 2
    ILLEGAL_FORMAT = 5
    INVALID_PARAMETER = 6
    INVALID_STATE = 7
    OUT_OF_BUDGET = 10
    OUT_OF_BOUNDS = 11
    EVALUATION_FAILED = 12
    DEGENERATE_INTERVAL = 13
    TUNING_FAILED = 14

    def __str__(self) -> str:
        return str(self.name).capitalize().replace('_', ' ')


class CvarBboException(Exception):
    """All custom exceptions used in cvar_bbo should inherit from this
    """

    def __init__(self, message: Optional[str], code: ExceptionCode = ExceptionCode.OK):
        if message is None:
            message = str(code)
        super().__init__(message)
        self.__message = message
        self.__code = code

    @property
    def message(self):
        return self.__message

    @property
    def code(self):
        return self.__code

    def __str__(self):
        return f'{self.message} ({self.code})'


class NotFoundException(CvarBboException):
    def __init__(self, message: Optional[str]):
        super().__init__(message, ExceptionCode.NOT_FOUND)


class IllegalFormatException(CvarBboException):
    def __init__(self, message: Optional[str]):
        super().__init__(message, ExceptionCode.ILLEGAL_FORMAT)


class InvalidParamsException(CvarBboException):
    def __init__(self, message: Optional[str]):
        super().__init__(message, ExceptionCode.INVALID_PARAMETER)


class InvalidStateException(CvarBboException):
    def __init__(self, message: Optional[str]):
        super().__init__(message, ExceptionCode.INVALID_STATE)


class BudgetExhaustedException(CvarBboException):
    def __init__(self, message: Optional[str]):
        super().__init__(message, ExceptionCode.OUT_OF_BUDGET)


class OutOfBoundsException(CvarBboException):
    def __init__(self, message: Optional[str]):
        super().__init__(message, ExceptionCode.OUT_OF_BOUNDS)


class DegenerateIntervalException(CvarBboException):
    def __init__(self, message: Optional[str]):
        super().__init__(message, ExceptionCode.DEGENERATE_INTERVAL)


class EvaluationException(CvarBboException):
    # index of the first non-finite output, 0 for the objective
    def __init__(self, message: Optional[str], index: int = 0):
        if not isinstance(index, int):
            raise InvalidParamsException('Invalid index type: not an integer')
        super().__init__(message, ExceptionCode.EVALUATION_FAILED)
        self.__index = index

    @property
    def index(self) -> int:
        return self.__index


class TuningException(CvarBboException):
    def __init__(self, message: Optional[str], report=None):
        super().__init__(message, ExceptionCode.TUNING_FAILED)
        self.__report = report

    @property
    def report(self):
        return self.__report
