from cvar_bbo.types.exception import InvalidParamsException


class RiskLevel:
    """Reliability level alpha in [0, 1); alpha = 0 is the expectation case."""

    def __init__(self, value: float):
        value = float(value)
        if not 0.0 <= value < 1.0:
            raise InvalidParamsException(f"Invalid risk level {value}: must satisfy 0 <= alpha < 1")
        self.value = value

    def __repr__(self):
        return f"RiskLevel({self.value})"

    def __float__(self):
        return self.value

    def __eq__(self, other):
        if isinstance(other, RiskLevel):
            return self.value == other.value
        return NotImplemented

    def __hash__(self):
        return hash(self.value)

    def percent(self) -> float:
        return self.value * 100

    def tail_weight(self) -> float:
        return 1.0 / (1.0 - self.value)

    @staticmethod
    def of(value) -> 'RiskLevel':
        return value if isinstance(value, RiskLevel) else RiskLevel(value)
