import itertools

import numpy as np
import pytest
from pydantic import ValidationError

from prefect_octacage.geometry import (
    ChargePair,
    Octahedron,
    charge_positions,
    contains,
    energy_unit_ev,
    kinetic_prefactor,
    units_to_ev,
    vertex,
    vertices,
)


def test_vertices_unit_cage():
    expected = np.array(
        [[0, 0, -1], [0, -1, 0], [-1, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
        dtype=float,
    )
    np.testing.assert_array_equal(vertices(1.0), expected)


def test_vertices_norm_and_antipodes():
    points = vertices(2.05)
    np.testing.assert_allclose(np.linalg.norm(points, axis=1), 2.05)
    for k in (1, 2, 3):
        np.testing.assert_array_equal(vertex(k, 2.05) + vertex(-k, 2.05), 0.0)


@pytest.mark.parametrize("a", [0.0, -1.0])
def test_vertices_reject_non_positive(a):
    with pytest.raises(ValueError):
        vertices(a)


def test_vertex_rejects_zero_index():
    with pytest.raises(ValueError):
        vertex(0)


def test_vertex_set_invariant_under_signed_permutations():
    points = {tuple(point) for point in vertices()}
    for permutation in itertools.permutations(range(3)):
        for signs in itertools.product((-1, 1), repeat=3):
            moved = {
                tuple(np.array(signs) * np.array(point)[list(permutation)])
                for point in points
            }
            assert moved == points


@pytest.mark.parametrize(
    "point, inside",
    [((0, 0, 0), True), ((0.6, 0.6, 0), False), ((0, 0, 1), True)],
)
def test_contains(point, inside):
    assert contains(point, 1.0) is inside


def test_contains_symmetric():
    rng = np.random.default_rng(3)
    points = rng.uniform(-1, 1, size=(200, 3))
    expected = contains(points)
    for permutation in itertools.permutations(range(3)):
        moved = -points[:, list(permutation)]
        np.testing.assert_array_equal(contains(moved), expected)


def test_charge_positions_symmetric():
    y1, y2 = charge_positions(0.8)
    np.testing.assert_array_equal(y1, [0, 0, 0.4])
    np.testing.assert_array_equal(y1, -y2)


def test_charge_pair():
    pair = ChargePair(separation=1.2)
    assert pair.half_separation == pytest.approx(0.6)
    y1, y2 = pair.positions
    assert contains(y1) and contains(y2)
    with pytest.raises(ValidationError):
        ChargePair(separation=2.0)


def test_octahedron_model():
    cage = Octahedron(half_diagonal=1.0)
    assert cage.volume == pytest.approx(4.0 / 3.0)
    assert cage.vertices.shape == (6, 3)
    assert cage.contains((0.2, 0.2, 0.2))
    with pytest.raises(ValidationError):
        Octahedron(half_diagonal=0.0)


def test_energy_unit():
    assert energy_unit_ev(2.05) == pytest.approx(7.024, abs=1e-3)
    assert energy_unit_ev(14.3996) == pytest.approx(1.0)
    assert units_to_ev(26, 2.05) == pytest.approx(182.0, rel=0.01)
    with pytest.raises(ValueError):
        energy_unit_ev(0.0)


def test_kinetic_prefactor():
    assert kinetic_prefactor(1.0) == pytest.approx(0.264, rel=0.01)
    assert kinetic_prefactor(2.05) == pytest.approx(0.1291, abs=1e-4)
    assert kinetic_prefactor(0.2645886054515) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        kinetic_prefactor(-2.0)


def test_unit_scalings_with_cage_size():
    grid = np.linspace(0.5, 5.0, 10)
    ratios = [energy_unit_ev(a) / kinetic_prefactor(a) for a in grid]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)
    assert ratios[0] == pytest.approx(54.42, rel=1e-3)
    products = [energy_unit_ev(a) * kinetic_prefactor(a) * a**2 for a in grid]
    np.testing.assert_allclose(products, products[0], rtol=1e-12)
