from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from cvar_bbo.types.constants import TRUNCATION_RETRIES
from cvar_bbo.types.exception import IllegalFormatException, InvalidParamsException


class Component:
    """One scalar source of uncertainty.

    :param perturbs: index of the design variable this noise is added to, None for parameter noise
    """

    KIND = ""

    def __init__(self, perturbs: Optional[int] = None):
        self._perturbs = perturbs

    @property
    def perturbs(self) -> Optional[int]:
        return self._perturbs

    def sample(self, rng: np.random.Generator, x: np.ndarray, size: Optional[int] = None):
        raise NotImplementedError

    def nominal(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def with_mean(self, value: float) -> Component:
        raise InvalidParamsException(f"{self.KIND} component has no settable mean")

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _base_dict(self) -> dict:
        d = {"kind": self.KIND}
        if self._perturbs is not None:
            d["perturbs"] = self._perturbs
        return d


class Constant(Component):
    KIND = "constant"

    def __init__(self, value: float, perturbs: Optional[int] = None):
        super().__init__(perturbs)
        self.__value = float(value)

    def __repr__(self):
        return f"Constant({self.__value})"

    @property
    def value(self) -> float:
        return self.__value

    def sample(self, rng, x, size=None):
        return self.__value if size is None else np.full(size, self.__value)

    def nominal(self, x) -> float:
        return self.__value

    def with_mean(self, value: float) -> Component:
        return Constant(value, self._perturbs)

    def to_dict(self) -> dict:
        d = self._base_dict()
        d["value"] = self.__value
        return d


class Uniform(Component):
    KIND = "uniform"

    def __init__(self, lo: float, hi: float, perturbs: Optional[int] = None):
        super().__init__(perturbs)
        if not lo < hi:
            raise InvalidParamsException(f"Invalid uniform bounds [{lo}, {hi}]")
        self.__lo = float(lo)
        self.__hi = float(hi)

    def __repr__(self):
        return f"Uniform({self.__lo}, {self.__hi})"

    @property
    def lo(self) -> float:
        return self.__lo

    @property
    def hi(self) -> float:
        return self.__hi

    def sample(self, rng, x, size=None):
        return rng.uniform(self.__lo, self.__hi, size)

    def nominal(self, x) -> float:
        return 0.5 * (self.__lo + self.__hi)

    def to_dict(self) -> dict:
        d = self._base_dict()
        d.update({"lo": self.__lo, "hi": self.__hi})
        return d


class BernoulliPair(Component):
    """Takes v1 or v2 with equal probability."""

    KIND = "bernoulli_pair"

    def __init__(self, v1: float, v2: float, perturbs: Optional[int] = None):
        super().__init__(perturbs)
        self.__v1 = float(v1)
        self.__v2 = float(v2)

    def __repr__(self):
        return f"BernoulliPair({self.__v1}, {self.__v2})"

    @property
    def values(self) -> tuple:
        return self.__v1, self.__v2

    def sample(self, rng, x, size=None):
        pick = rng.random(size) < 0.5
        return np.where(pick, self.__v1, self.__v2) if size is not None else (self.__v1 if pick else self.__v2)

    def nominal(self, x) -> float:
        return 0.5 * (self.__v1 + self.__v2)

    def to_dict(self) -> dict:
        d = self._base_dict()
        d.update({"v1": self.__v1, "v2": self.__v2})
        return d


class Normal(Component):
    """Normal noise. The mean may itself be random (epistemic mean law).

    :param scale_by_x: if set, the standard deviation is std * |x[scale_by_x]|
    """

    KIND = "normal"

    def __init__(self, mean: Union[float, Component], std: float, scale_by_x: Optional[int] = None,
                 perturbs: Optional[int] = None):
        super().__init__(perturbs)
        if not std > 0:
            raise InvalidParamsException(f"Invalid standard deviation {std}")
        self.__mean = mean if isinstance(mean, Component) else float(mean)
        self.__std = float(std)
        self.__scale_by_x = scale_by_x

    def __repr__(self):
        return f"Normal({self.__mean}, {self.__std}, scale_by_x={self.__scale_by_x})"

    @property
    def mean(self) -> Union[float, Component]:
        return self.__mean

    @property
    def std(self) -> float:
        return self.__std

    @property
    def scale_by_x(self) -> Optional[int]:
        return self.__scale_by_x

    def std_at(self, x: np.ndarray) -> float:
        if self.__scale_by_x is None:
            return self.__std
        return self.__std * abs(float(x[self.__scale_by_x]))

    def _mean_sample(self, rng, x, size):
        if isinstance(self.__mean, Component):
            return self.__mean.sample(rng, x, size)
        return self.__mean

    def sample(self, rng, x, size=None):
        mean = self._mean_sample(rng, x, size)
        return rng.normal(mean, self.std_at(x), size)

    def nominal(self, x) -> float:
        if isinstance(self.__mean, Component):
            return self.__mean.nominal(x)
        return self.__mean

    def with_mean(self, value: float) -> Component:
        return Normal(value, self.__std, self.__scale_by_x, self._perturbs)

    def to_dict(self) -> dict:
        d = self._base_dict()
        d["mean"] = self.__mean.to_dict() if isinstance(self.__mean, Component) else self.__mean
        d["std"] = self.__std
        if self.__scale_by_x is not None:
            d["scale_by_x"] = self.__scale_by_x
        return d


class TruncatedNormal(Component):
    KIND = "truncated_normal"

    def __init__(self, mean: float, std: float, lo: float, hi: float, perturbs: Optional[int] = None):
        super().__init__(perturbs)
        if not std > 0:
            raise InvalidParamsException(f"Invalid standard deviation {std}")
        if not lo < hi:
            raise InvalidParamsException(f"Invalid truncation bounds [{lo}, {hi}]")
        self.__mean = float(mean)
        self.__std = float(std)
        self.__lo = float(lo)
        self.__hi = float(hi)

    def __repr__(self):
        return f"TruncatedNormal({self.__mean}, {self.__std}, {self.__lo}, {self.__hi})"

    def sample(self, rng, x, size=None):
        from cvar_bbo.smoothing import trunc_normal_ppf

        a = (self.__lo - self.__mean) / self.__std
        b = (self.__hi - self.__mean) / self.__std
        z = trunc_normal_ppf(rng.random(size), a, b)
        value = self.__mean + self.__std * z
        return float(value) if size is None else value

    def nominal(self, x) -> float:
        return self.__mean

    def with_mean(self, value: float) -> Component:
        return TruncatedNormal(value, self.__std, self.__lo, self.__hi, self._perturbs)

    def to_dict(self) -> dict:
        d = self._base_dict()
        d.update({"mean": self.__mean, "std": self.__std, "lo": self.__lo, "hi": self.__hi})
        return d


COMPONENT_KINDS = {
    Constant.KIND: lambda d: Constant(d["value"], d.get("perturbs")),
    Uniform.KIND: lambda d: Uniform(d["lo"], d["hi"], d.get("perturbs")),
    BernoulliPair.KIND: lambda d: BernoulliPair(d["v1"], d["v2"], d.get("perturbs")),
    Normal.KIND: lambda d: Normal(
        component_from_dict(d["mean"]) if isinstance(d["mean"], dict) else d["mean"],
        d["std"], d.get("scale_by_x"), d.get("perturbs"),
    ),
    TruncatedNormal.KIND: lambda d: TruncatedNormal(d["mean"], d["std"], d["lo"], d["hi"], d.get("perturbs")),
}


def component_from_dict(values: dict) -> Component:
    kind = values.get("kind")
    if kind not in COMPONENT_KINDS:
        raise IllegalFormatException(f"Unknown uncertainty kind '{kind}'")
    try:
        return COMPONENT_KINDS[kind](values)
    except KeyError as e:
        raise IllegalFormatException(f"Missing field {e} in {kind} descriptor")


class UncertaintyModel:
    """Vector of independent components xi_1..xi_d.

    When `truncate_to` is set (lower, upper in original units), every component that perturbs a
    design variable is resampled until x + xi stays inside the box, then clamped.
    """

    def __init__(self, components: Sequence[Component], truncate_to: Optional[tuple] = None):
        self.__components: List[Component] = list(components)
        self.__truncate_to = truncate_to

    def __repr__(self):
        return f"UncertaintyModel({self.__components}, truncated={self.__truncate_to is not None})"

    @property
    def dim(self) -> int:
        return len(self.__components)

    @property
    def components(self) -> List[Component]:
        return self.__components

    @property
    def is_truncated(self) -> bool:
        return self.__truncate_to is not None

    def sample(self, rng: np.random.Generator, x: np.ndarray, x_eval: Optional[np.ndarray] = None,
               size: Optional[int] = None) -> np.ndarray:
        """Draw one realization (shape (d,)) or `size` of them (shape (size, d)).

        :param x: unperturbed design point in original units, drives x-dependent scales
        :param x_eval: point actually evaluated, used for truncation; defaults to x
        """
        x = np.asarray(x, dtype=float)
        x_eval = x if x_eval is None else np.asarray(x_eval, dtype=float)
        shape = (self.dim,) if size is None else (size, self.dim)
        out = np.empty(shape)
        for i, c in enumerate(self.__components):
            value = c.sample(rng, x, size)
            if self.__truncate_to is not None and c.perturbs is not None:
                value = self._truncate(c, rng, x, x_eval[c.perturbs], value, size)
            out[..., i] = value
        return out

    def _truncate(self, c: Component, rng, x, x_i: float, value, size):
        lo = self.__truncate_to[0][c.perturbs] - x_i
        hi = self.__truncate_to[1][c.perturbs] - x_i
        value = np.array(value, dtype=float, ndmin=1)
        bad = (value < lo) | (value > hi)
        retries = 0
        while bad.any() and retries < TRUNCATION_RETRIES:
            value[bad] = np.array(c.sample(rng, x, int(bad.sum())), ndmin=1)
            bad = (value < lo) | (value > hi)
            retries += 1
        value = np.clip(value, lo, hi)
        return value if size is not None else float(value[0])

    def nominal(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([c.nominal(x) for c in self.__components], dtype=float)

    def truncated(self, lower: Sequence[float], upper: Sequence[float]) -> UncertaintyModel:
        return UncertaintyModel(self.__components, (np.asarray(lower, float), np.asarray(upper, float)))

    def with_means(self, means: Dict[int, float]) -> UncertaintyModel:
        components = list(self.__components)
        for index, value in means.items():
            if not 0 <= index < len(components):
                raise InvalidParamsException(f"Invalid uncertainty index {index}")
            components[index] = components[index].with_mean(value)
        return UncertaintyModel(components, self.__truncate_to)

    def to_list(self) -> List[dict]:
        return [c.to_dict() for c in self.__components]

    @staticmethod
    def from_list(values: List[dict]) -> UncertaintyModel:
        return UncertaintyModel([component_from_dict(v) for v in values])
