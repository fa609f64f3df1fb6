import numpy as np
import pytest

from cvar_bbo.smoothing import (
    KernelKind,
    SmoothingKernel,
    TruncBounds,
    gaussian_estimate,
    one_sided_estimate,
    sample_trunc_normal,
    std_normal_cdf,
    std_normal_pdf,
    trunc_normal_mean,
    trunc_normal_ppf,
    two_sided_estimate,
)
from cvar_bbo.types.exception import DegenerateIntervalException, InvalidParamsException


def test_std_normal():
    assert std_normal_pdf(0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.96) == pytest.approx(0.9750021, abs=1e-7)


@pytest.mark.parametrize("lower, upper, expected", [
    (-2.0, 2.0, 0.0),
    (0.0, np.inf, np.sqrt(2.0 / np.pi)),
    (-np.inf, np.inf, 0.0),
    (-np.inf, 0.0, -np.sqrt(2.0 / np.pi)),
])
def test_trunc_normal_mean(lower, upper, expected):
    assert trunc_normal_mean(TruncBounds(lower, upper))[0] == pytest.approx(expected, abs=1e-12)


def test_trunc_normal_mean_far_tail():
    # left-tail mean of [8, 9] sits just above 8
    mean = trunc_normal_mean(TruncBounds(8.0, 9.0))[0]
    assert 8.0 < mean < 8.2


@pytest.mark.parametrize("lower, upper", [(1.0, 0.0), (0.0, 0.0), (np.nan, 1.0)])
def test_trunc_bounds_invalid(lower, upper):
    with pytest.raises(InvalidParamsException):
        TruncBounds(lower, upper)


def test_trunc_bounds_reflected_and_around():
    bounds = TruncBounds.around(np.array([0.25]), 0.0, 1.0, 0.5)
    assert np.allclose(bounds.lower, [-0.5])
    assert np.allclose(bounds.upper, [1.5])
    reflected = bounds.reflected()
    assert np.allclose(reflected.lower, [-1.5])
    assert np.allclose(reflected.upper, [0.5])


def test_unbounded_sample_is_plain_normal():
    bounds = TruncBounds(np.full(3, -np.inf), np.full(3, np.inf))
    assert bounds.is_unbounded()
    drawn = sample_trunc_normal(bounds, np.random.default_rng(7))
    assert np.array_equal(drawn, np.random.default_rng(7).standard_normal(3))


def test_sample_containment():
    rng = np.random.default_rng(13)
    size = 200000
    lower = rng.uniform(-10.0, 10.0, size)
    width = 10.0 ** rng.uniform(-6.0, 1.0, size)
    upper = lower + width
    samples = sample_trunc_normal(TruncBounds(lower, upper), rng)
    assert np.isfinite(samples).all()
    assert (samples > lower).all()
    assert (samples < upper).all()


@pytest.mark.parametrize("lower, upper", [(-40000.0, 0.0), (8.0, 9.0), (-9.0, -8.0), (0.0, 1e-9)])
def test_sample_containment_extreme(lower, upper):
    rng = np.random.default_rng(17)
    bounds = TruncBounds(np.full(1000, lower), np.full(1000, upper))
    samples = sample_trunc_normal(bounds, rng)
    assert (samples > lower).all()
    assert (samples < upper).all()


@pytest.mark.parametrize("lower, upper", [(-1.0, 1.0), (0.0, np.inf), (1.0, 3.0), (-0.5, 4.0)])
def test_sample_mean_matches_formula(lower, upper):
    rng = np.random.default_rng(21)
    size = 100000
    samples = sample_trunc_normal(TruncBounds(np.full(size, lower), np.full(size, upper)), rng)
    expected = trunc_normal_mean(TruncBounds(lower, upper))[0]
    assert abs(samples.mean() - expected) <= 4.0 * samples.std() / np.sqrt(size)


def test_ppf_median_and_monotone():
    assert float(trunc_normal_ppf(0.5, -3.0, 3.0)) == pytest.approx(0.0, abs=1e-12)
    q = np.linspace(0.01, 0.99, 99)
    z = trunc_normal_ppf(q, 0.5, 2.0)
    assert (np.diff(z) > 0).all()


@pytest.mark.parametrize("lower, upper", [(0.0, 1e-13), (40.0, 41.0)])
def test_degenerate_interval(lower, upper):
    with pytest.raises(DegenerateIntervalException):
        sample_trunc_normal(TruncBounds(lower, upper), np.random.default_rng(0))


def test_degenerate_mean():
    with pytest.raises(DegenerateIntervalException):
        trunc_normal_mean(TruncBounds(40.0, 41.0))


def test_one_sided_estimate():
    assert np.allclose(one_sided_estimate([1.0, 2.0], [0.0, 0.0], 3.0, 3.0, 0.5), [0.0, 0.0])
    # c(x) = 2x at x = 0, u = 1, beta = 0.5
    assert np.allclose(one_sided_estimate([1.0], [0.0], 1.0, 0.0, 0.5), [2.0])
    assert np.allclose(one_sided_estimate([0.3], [0.3], 5.0, 1.0, 0.1), [0.0])


def test_one_sided_estimate_batch():
    u = np.array([[1.0, 2.0], [0.5, -1.0]])
    forward = np.array([2.0, 3.0])
    out = one_sided_estimate(u, np.zeros(2), forward, 1.0, 0.5)
    assert np.allclose(out, [[2.0, 4.0], [2.0, -4.0]])


def test_two_sided_estimate_linear():
    a, beta, x = 2.0, 0.1, 0.5
    u = np.array([0.7])
    forward, backward, base = a * (x + beta * u[0]), a * (x - beta * u[0]), a * x
    two = two_sided_estimate(u, 0.0, forward, u, 0.0, backward, base, beta)
    one = one_sided_estimate(u, 0.0, forward, base, beta)
    assert np.allclose(two, one)
    assert np.allclose(two_sided_estimate(u, 0.0, 1.0, u, 0.0, 1.0, 1.0, beta), [0.0])


def test_gaussian_estimate():
    assert np.allclose(gaussian_estimate([0.7], 3.0 * 0.14, 0.0, 0.2), [1.47])
    assert np.allclose(gaussian_estimate([0.7, -1.0], 2.0, 2.0, 0.2), [0.0, 0.0])


def test_gaussian_estimate_unbiased_on_linear():
    rng = np.random.default_rng(31)
    size, beta, slope = 100000, 0.2, np.array([3.0, -1.0])
    x = np.array([0.4, 0.6])
    u = rng.standard_normal((size, 2))
    forward = (x + beta * u) @ slope
    base = x @ slope
    estimates = gaussian_estimate(u, forward, base, beta)
    error = np.abs(estimates.mean(axis=0) - slope)
    assert (error <= 4.0 * estimates.std(axis=0) / np.sqrt(size)).all()


def test_truncated_estimate_on_quadratic_interior():
    # bounds (-5, 5) around x = 0.5 with beta = 0.1: the kernel is almost an untruncated gaussian
    rng = np.random.default_rng(37)
    size, beta, x = 100000, 0.1, 0.5
    bounds = TruncBounds(np.full(size, -x / beta), np.full(size, (1.0 - x) / beta))
    u = sample_trunc_normal(bounds, rng)
    mu = trunc_normal_mean(TruncBounds(-x / beta, (1.0 - x) / beta))[0]
    estimates = one_sided_estimate(u, mu, (x + beta * u) ** 2, x ** 2, beta)
    assert abs(estimates.mean() - 2.0 * x) <= 4.0 * estimates.std() / np.sqrt(size) + 1e-4


def test_kernel_draw_stays_in_cube():
    kernel = SmoothingKernel(KernelKind.TRUNCATED, 0.1)
    rng = np.random.default_rng(41)
    center = np.array([0.0, 0.5, 1.0])
    for _ in range(200):
        u, mu = kernel.draw(center, 0.0, 1.0, rng)
        point = center + 0.1 * u
        assert ((point >= 0.0) & (point <= 1.0)).all()
        u2, _ = kernel.draw(center, 0.0, 1.0, rng, reflected=True)
        back = center - 0.1 * u2
        assert ((back >= 0.0) & (back <= 1.0)).all()
    assert mu[0] > 0 and mu[2] < 0


def test_gaussian_kernel_draw():
    kernel = SmoothingKernel(KernelKind.GAUSSIAN, 0.05)
    u, mu = kernel.draw(np.array([0.0, 1.0]), 0.0, 1.0, np.random.default_rng(0))
    assert u.shape == (2,)
    assert np.array_equal(mu, np.zeros(2))


def test_kernel_kind_from_string():
    assert KernelKind.from_string("Gaussian") == KernelKind.GAUSSIAN
    assert KernelKind.from_string("truncated") == KernelKind.TRUNCATED
    with pytest.raises(InvalidParamsException):
        KernelKind.from_string("uniform")


def test_kernel_invalid_beta():
    with pytest.raises(InvalidParamsException):
        SmoothingKernel(KernelKind.GAUSSIAN, 0.0)
