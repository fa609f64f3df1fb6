"""Builtin engineering design problems.

Every evaluator is vectorized over realizations: `xi` may be (d,) or (N, d), and the first n
components of `xi` perturb the design variables.
"""

from __future__ import annotations

from typing import Callable, Dict, List

import numpy as np

from cvar_bbo.blackbox import Box, EpistemicParameter, Problem, ReferenceSolution
from cvar_bbo.types.exception import NotFoundException
from cvar_bbo.types.uncertainty import BernoulliPair, Normal, UncertaintyModel, Uniform


def _perturbed(x: np.ndarray, xi: np.ndarray) -> List[np.ndarray]:
    n = x.shape[-1]
    z = x + xi[..., :n]
    return [z[..., i] for i in range(n)]


def _param(xi: np.ndarray, i: int) -> np.ndarray:
    return xi[..., i]


def _perturbations(stds, scale_by_x: bool = False) -> list:
    return [Normal(0.0, s, scale_by_x=i if scale_by_x else None, perturbs=i) for i, s in enumerate(stds)]


# steel column design
SCD_LENGTH = 7500.0


def scd_evaluate(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    z1, z2, z3 = _perturbed(x, xi)
    xi4, xi5, xi6, xi7, xi8, xi9 = (_param(xi, i) for i in range(3, 9))
    c0 = z1 * z2 + 5.0 * z3
    area = 2.0 * z1 * z2
    modulus = z1 * z2 * z3
    inertia = 0.5 * z1 * z2 * z3 ** 2
    euler = np.pi ** 2 * xi9 * inertia / SCD_LENGTH ** 2
    force = xi5 + xi6 + xi7
    c1 = force * (1.0 / area + xi8 * euler / (modulus * (euler - force))) - xi4
    return np.stack([c0, c1], axis=-1)


def steel_column() -> Problem:
    components = _perturbations((0.1, 0.1, 0.1), scale_by_x=True) + [
        Normal(400.0, 40.0),
        Normal(5e5, 5e4),
        Normal(6e5, 6e4),
        Normal(6e5, 6e4),
        Normal(30.0, 3.0),
        Normal(21000.0, 2100.0),
    ]
    return Problem(
        name="SCD",
        box=Box([200.0, 10.0, 100.0], [400.0, 30.0, 500.0]),
        x0=[200.0, 10.5, 100.0],
        m=1,
        evaluator=scd_evaluate,
        uncertainty=UncertaintyModel(components),
        vectorized=True,
        reference=ReferenceSolution([257.7806, 13.5335, 100.0], 3988.95, 0.9947, "SORA"),
        description="steel column design, 3 variables, 1 buckling constraint",
    )


# welded beam design
WBD_K = (6.74135e-5, 2.93585e-6, 355.6, 2.6688e4, 2.0685e5, 8.274e4)


def wbd_evaluate(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    k1, k2, k3, k4, k5, k6 = WBD_K
    z1, z2, z3, z4 = _perturbed(x, xi)
    c0 = k1 * z1 ** 2 * z2 + k2 * z3 * z4 * (k3 + z2)

    tau1 = k4 / (np.sqrt(2.0) * z1 * z2)
    radius = np.sqrt(z2 ** 2 + (z1 + z3) ** 2) / 2.0
    moment = k4 * (k3 + z2 / 2.0)
    polar = np.sqrt(2.0) * z1 * z2 * (z2 ** 2 / 12.0 + (z1 + z3) ** 2 / 4.0)
    tau2 = moment * radius / polar
    tau = np.sqrt(tau1 ** 2 + 2.0 * tau1 * tau2 * z2 / (2.0 * radius) + tau2 ** 2)
    c1 = tau / 93.77 - 1.0

    sigma = 6.0 * k4 * k3 / (z3 ** 2 * z4)
    c2 = sigma / 206.85 - 1.0
    c3 = z1 / z4 - 1.0
    delta = 4.0 * k4 * k3 ** 3 / (2.0685e5 * z3 ** 3 * z4)
    c4 = delta / 6.35 - 1.0
    buckling = 4.013 * z3 * z4 ** 3 * np.sqrt(k5 * k6) / (6.0 * k3 ** 2) \
        * (1.0 - z3 / (4.0 * k3) * np.sqrt(k5 / k6))
    c5 = 1.0 - buckling / k4
    return np.stack([c0, c1, c2, c3, c4, c5], axis=-1)


def welded_beam() -> Problem:
    components = [
        Uniform(-0.1693, 0.1693, perturbs=0),
        Uniform(-0.1693, 0.1693, perturbs=1),
        Uniform(-0.0107, 0.0107, perturbs=2),
        Uniform(-0.0107, 0.0107, perturbs=3),
    ]
    return Problem(
        name="WBD",
        box=Box([3.175, 0.0, 0.0, 0.0], [50.8, 254.0, 254.0, 50.8]),
        x0=[6.208, 157.82, 210.62, 6.208],
        m=5,
        evaluator=wbd_evaluate,
        uncertainty=UncertaintyModel(components),
        vectorized=True,
        reference=ReferenceSolution([5.9188, 181.2849, 210.6114, 6.2253], 2.4948, 1.0, "SORA"),
        description="welded beam design, 4 variables, 5 constraints",
    )


# vehicle side impact
def vsi_evaluate(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    z1, z2, z3, z4, z5, z6, z7 = _perturbed(x, xi)
    p8, p9, p10, p11 = (_param(xi, i) for i in range(7, 11))
    c0 = 1.98 + 4.9 * z1 + 6.67 * z2 + 6.98 * z3 + 4.01 * z4 + 1.78 * z5 + 2.73 * z7
    c1 = 1.16 - 0.3717 * z2 * z4 - 0.00931 * z2 * p10 - 0.484 * z3 * p9 + 0.01343 * z6 * p10 - 1.0
    c2 = 0.261 - 0.0159 * z1 * z2 - 0.188 * z1 * p8 - 0.019 * z2 * z7 + 0.0144 * z3 * z5 \
        + 0.0008757 * z5 * p10 + 0.08045 * z6 * p9 + 0.00139 * p8 * p11 + 1.575e-6 * p10 * p11 - 0.32
    c3 = 0.2147 + 0.00817 * z5 - 0.131 * z1 * p8 - 0.0704 * z1 * p9 + 0.03099 * z2 * z6 \
        - 0.018 * z2 * z7 + 0.0208 * z3 * p8 + 0.121 * z3 * p9 - 0.00364 * z5 * z6 \
        + 0.0007715 * z5 * p10 - 0.0005354 * z6 * p10 + 0.00121 * p8 * p11 + 0.00184 * p9 * p10 \
        - 0.02 * z2 ** 2 - 0.32
    c4 = 0.74 - 0.61 * z2 - 0.163 * z3 * p8 + 0.001232 * z3 * p10 - 0.166 * z7 * p9 + 0.227 * z2 ** 2 - 0.32
    c5 = 28.98 + 3.818 * z3 - 4.2 * z1 * z2 + 0.0207 * z5 * p10 + 6.63 * z6 * p9 - 7.77 * z7 * p8 \
        + 0.32 * p9 * p10 - 32.0
    c6 = 33.86 + 2.95 * z3 + 0.1792 * p10 - 5.057 * z1 * z2 - 11.0 * z2 * p8 - 0.0215 * z5 * p10 \
        - 9.98 * z7 * p8 + 22.0 * p8 * p9 - 32.0
    c7 = 46.36 - 9.9 * z2 - 12.9 * z1 * p8 + 0.1107 * z3 * p10 - 32.0
    c8 = 4.72 - 0.54 * z4 - 0.19 * z2 * z3 - 0.0122 * z4 * p10 + 0.009325 * z6 * p10 \
        + 0.000191 * p11 ** 2 - 4.0
    c9 = 10.58 - 0.674 * z1 * z2 - 1.95 * z2 * p8 + 0.028 * z6 * p10 + 0.02054 * z3 * p10 \
        - 0.0198 * z4 * p10 - 9.9
    c10 = 16.45 - 0.489 * z3 * z7 - 0.843 * z5 * z6 + 0.0432 * p9 * p10 - 0.0556 * p9 * p11 \
        - 0.000786 * p11 ** 2 - 15.69
    return np.stack([c0, c1, c2, c3, c4, c5, c6, c7, c8, c9, c10], axis=-1)


VSI_LOWER = [0.5, 0.45, 0.5, 0.5, 0.875, 0.4, 0.4]
VSI_UPPER = [1.5, 1.35, 1.5, 1.5, 2.625, 1.2, 1.2]
VSI_MATERIAL_STD = 0.006
VSI_MATERIAL_MEAN = 0.345
VSI_EPISTEMIC_RANGE = (0.192, 0.345)


def _vsi_components(material_mean) -> list:
    return _perturbations((0.03, 0.03, 0.03, 0.03, 0.05, 0.03, 0.03)) + [
        Normal(material_mean, VSI_MATERIAL_STD),
        Normal(material_mean, VSI_MATERIAL_STD),
        Normal(0.0, 10.0),
        Normal(0.0, 10.0),
    ]


def _vsi(name: str, components: list, epistemic=None, description: str = "") -> Problem:
    return Problem(
        name=name,
        box=Box(VSI_LOWER, VSI_UPPER),
        x0=[1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0],
        m=10,
        evaluator=vsi_evaluate,
        uncertainty=UncertaintyModel(components),
        vectorized=True,
        epistemic=epistemic,
        reference=ReferenceSolution([0.7872, 1.35, 0.6887, 1.5, 1.0706, 1.2, 0.7284], 29.5585, 0.9982, "SORA"),
        description=description,
    )


def vehicle_side_impact() -> Problem:
    return _vsi("VSI", _vsi_components(VSI_MATERIAL_MEAN),
                description="vehicle side impact, 7 variables, 10 constraints")


def _epistemic_params(discrete: bool) -> List[EpistemicParameter]:
    return [EpistemicParameter(i, *VSI_EPISTEMIC_RANGE, points=VSI_EPISTEMIC_RANGE, discrete=discrete)
            for i in (7, 8)]


def vehicle_side_impact_points() -> Problem:
    """Material means take one of two values with equal probability."""
    components = _vsi_components(BernoulliPair(*VSI_EPISTEMIC_RANGE))
    return _vsi("VSI-epistemic-points", components, _epistemic_params(True),
                "vehicle side impact, material means at two known points")


def vehicle_side_impact_interval() -> Problem:
    """Material means only known to lie in an interval."""
    components = _vsi_components(Uniform(*VSI_EPISTEMIC_RANGE))
    return _vsi("VSI-epistemic-interval", components, _epistemic_params(False),
                "vehicle side impact, material means within an interval")


# speed reducer design
def srd_evaluate(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    z1, z2, z3, z4, z5, z6, z7 = _perturbed(x, xi)
    c0 = 0.7854 * z1 * z2 ** 2 * (3.3333 * z3 ** 2 + 14.9334 * z3 - 43.0934) \
        - 1.508 * z1 * (z6 ** 2 + z7 ** 2) + 7.477 * (z6 ** 3 + z7 ** 3) + 0.7854 * (z4 * z6 ** 2 + z5 * z7 ** 2)
    c1 = 27.0 / (z1 * z2 ** 2 * z3) - 1.0
    c2 = 397.5 / (z1 * z2 ** 2 * z3 ** 2) - 1.0
    c3 = 1.93 * z4 ** 3 / (z2 * z3 * z6 ** 4) - 1.0
    c4 = 1.93 * z5 ** 3 / (z2 * z3 * z7 ** 4) - 1.0
    # both shaft stress limits load with the fifth variable
    c5 = np.sqrt((745.0 * z5 / (z2 * z3)) ** 2 + 16.9e6) / (0.1 * z6 ** 3) - 1100.0
    c6 = np.sqrt((745.0 * z5 / (z2 * z3)) ** 2 + 157.5e6) / (0.1 * z7 ** 3) - 850.0
    c7 = z2 * z3 - 40.0
    c8 = 5.0 - z1 / z2
    c9 = z1 / z2 - 12.0
    c10 = (1.5 * z6 + 1.9) / z4 - 1.0
    c11 = (1.1 * z7 + 1.9) / z5 - 1.0
    return np.stack([c0, c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11], axis=-1)


def speed_reducer() -> Problem:
    return Problem(
        name="SRD",
        box=Box([2.6, 0.7, 17.0, 7.3, 7.3, 2.9, 5.0], [3.6, 0.8, 28.0, 8.3, 8.3, 3.9, 5.5]),
        x0=[3.5, 0.7, 17.0, 7.3, 7.72, 3.35, 5.29],
        m=11,
        evaluator=srd_evaluate,
        uncertainty=UncertaintyModel(_perturbations((0.005,) * 7)),
        vectorized=True,
        reference=ReferenceSolution([3.5765, 0.7, 17.0, 7.3, 7.7541, 3.3652, 5.3017], 3038.72, 0.9976, "SORA"),
        description="speed reducer design, 7 variables, 11 constraints",
    )


BUILTIN_PROBLEMS: Dict[str, Callable[[], Problem]] = {
    "SCD": steel_column,
    "WBD": welded_beam,
    "VSI": vehicle_side_impact,
    "SRD": speed_reducer,
    "VSI-epistemic-points": vehicle_side_impact_points,
    "VSI-epistemic-interval": vehicle_side_impact_interval,
}


def problem_names() -> List[str]:
    return list(BUILTIN_PROBLEMS)


def builtin_problem(name: str) -> Problem:
    for key, factory in BUILTIN_PROBLEMS.items():
        if key.lower() == name.lower():
            return factory()
    raise NotFoundException(f"Unknown problem '{name}'. Available: {', '.join(BUILTIN_PROBLEMS)}")
