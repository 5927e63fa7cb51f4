import math

import numpy as np
import pytest
from pydantic import ValidationError

from prefect_octacage.exceptions import QuadratureError
from prefect_octacage.geometry import contains
from prefect_octacage.quadrature import (
    BLOCK_SIZE,
    QuadratureMethod,
    QuadratureSpec,
    block_fsum,
    coulomb,
    gauss_legendre_rule,
    integrate_volume,
    integrate_z,
    sample_volume,
)


def ones(points):
    return np.ones(len(points))


@pytest.fixture
def mc_spec():
    return QuadratureSpec(points=50_000, seed=5)


@pytest.fixture
def gauss_spec():
    return QuadratureSpec(method=QuadratureMethod.PRODUCT_GAUSS, points=8)


def test_coulomb():
    assert coulomb(1.0, 0.0) == 1.0
    assert coulomb(0.0, 1e-3) == pytest.approx(1000.0)
    r = np.array([0.5, 1.0, 2.0])
    delta = 1e-3
    np.testing.assert_allclose(coulomb(r, delta), 1 / r, rtol=(delta / 0.5) ** 2)


def test_spec_validation():
    with pytest.raises(ValidationError):
        QuadratureSpec(points=0)
    with pytest.raises(ValidationError):
        QuadratureSpec(delta=-1.0)
    with pytest.raises(ValidationError):
        QuadratureSpec(unknown=1)


def test_monte_carlo_nodes_inside(mc_spec):
    sample = sample_volume(mc_spec)
    assert sample.points.shape == (50_000, 3)
    assert contains(sample.points).all()
    assert sample.n_nodes == 50_000


def test_monte_carlo_volume(mc_spec):
    result = integrate_volume(ones, mc_spec)
    assert result.value == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert result.error_estimate == pytest.approx(0.0, abs=1e-9)


def test_monte_carlo_odd_integrand(mc_spec):
    result = integrate_volume(lambda points: points[:, 0], mc_spec)
    assert abs(result.value) <= 3 * result.error_estimate
    assert result.error_estimate > 0


def test_monte_carlo_deterministic(mc_spec):
    first = integrate_volume(lambda points: np.exp(points[:, 2]), mc_spec)
    second = integrate_volume(lambda points: np.exp(points[:, 2]), mc_spec)
    assert first.value == second.value
    assert first.error_estimate == second.error_estimate


def test_monte_carlo_prefix_stable():
    short = sample_volume(QuadratureSpec(points=BLOCK_SIZE + 10, seed=9))
    long = sample_volume(QuadratureSpec(points=3 * BLOCK_SIZE, seed=9))
    np.testing.assert_array_equal(short.points, long.points[: BLOCK_SIZE + 10])


def test_monte_carlo_error_scaling():
    errors = [
        integrate_volume(
            lambda points: np.exp(points[:, 0] + points[:, 1]),
            QuadratureSpec(points=points, seed=21),
        ).error_estimate
        for points in (100, 1_000, 10_000, 100_000)
    ]
    slope = np.polyfit(np.log10([100, 1_000, 10_000, 100_000]), np.log10(errors), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.15)


def test_monte_carlo_softened_coulomb_converges():
    def inverse_radius(points):
        return coulomb(np.linalg.norm(points, axis=1), 1e-3)

    coarse = integrate_volume(inverse_radius, QuadratureSpec(points=20_000, seed=2))
    fine = integrate_volume(inverse_radius, QuadratureSpec(points=200_000, seed=2))
    assert np.isfinite(coarse.value)
    tolerance = 3 * (coarse.error_estimate + fine.error_estimate)
    assert abs(coarse.value - fine.value) <= tolerance
    assert fine.error_estimate < coarse.error_estimate


def test_product_gauss_volume_and_polynomials(gauss_spec):
    sample = sample_volume(gauss_spec)
    fine = sample.weights != 0
    assert contains(sample.points[fine]).all()
    assert integrate_volume(ones, gauss_spec).value == pytest.approx(4.0 / 3.0)
    # integral of x1^2 over the unit octahedron is 2/15
    second = integrate_volume(lambda points: points[:, 0] ** 2, gauss_spec)
    assert second.value == pytest.approx(2.0 / 15.0)
    odd = integrate_volume(lambda points: points[:, 1] ** 3, gauss_spec)
    assert odd.value == pytest.approx(0.0, abs=1e-14)


def test_product_gauss_scales_with_cage(gauss_spec):
    result = integrate_volume(ones, gauss_spec, a=2.0)
    assert result.value == pytest.approx(4.0 * 8.0 / 3.0)


def test_non_finite_integrand_reports_elements(mc_spec):
    def singular(points):
        values = np.ones((2, len(points)))
        values[1, 0] = np.inf
        return values

    with pytest.raises(QuadratureError, match=r"\[\[1\]\]"):
        integrate_volume(singular, mc_spec)


def test_stacked_integrands_match_single(mc_spec):
    sample = sample_volume(mc_spec)
    stacked = sample.integrate(
        lambda points: np.stack([points[:, 0] ** 2, points[:, 2] ** 2])
    )
    single = sample.integrate(lambda points: points[:, 0] ** 2)
    assert stacked.value[0] == pytest.approx(single.value, rel=1e-12)
    assert stacked.value[1] == pytest.approx(single.value, rel=0.05)


def test_block_fsum_is_order_independent():
    rng = np.random.default_rng(0)
    partials = rng.normal(size=(50, 3)) * 10.0 ** rng.integers(-8, 8, size=(50, 3))
    np.testing.assert_array_equal(block_fsum(partials), block_fsum(partials[::-1]))
    assert block_fsum(partials)[0] == math.fsum(partials[:, 0])


def test_gauss_legendre_rule():
    nodes, weights = gauss_legendre_rule((0.0, 1.9), 3)
    assert np.all(np.diff(nodes) > 0)
    assert weights.sum() == pytest.approx(1.9)
    with pytest.raises(ValueError):
        gauss_legendre_rule((1.0, 1.0), 3)


def test_integrate_z():
    spec = QuadratureSpec(z_points=4)
    assert integrate_z(lambda z: np.ones_like(z), (0.0, 1.9), spec).value == (
        pytest.approx(1.9)
    )
    square = integrate_z(lambda t: t**2, (-1.0, 1.0), QuadratureSpec(z_points=2))
    assert square.value == pytest.approx(2.0 / 3.0)


def test_integrate_z_softened_pole():
    delta = 1e-3
    exact = math.log((1.9 + delta) / delta)
    result = integrate_z(
        lambda z: 1.0 / (z + delta), (0.0, 1.9), QuadratureSpec(z_points=400)
    )
    assert result.value == pytest.approx(exact, rel=1e-6)
