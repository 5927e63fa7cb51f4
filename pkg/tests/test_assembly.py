import math

import numpy as np
import pytest
from pydantic import ValidationError

from prefect_octacage.assembly import (
    MatrixKind,
    MatrixPair,
    combine_slices,
    dynamic_matrix,
    electron_potential,
    static_electron_matrix,
    static_offset,
    z_nodes,
    z_slice,
)
from prefect_octacage.eigensolver import solve


def _index(pair, label):
    return pair.labels.index(label)


def test_static_offset_hand_value(small_config):
    expected = 1.0 + 2 * 10.0 * (1 / 0.5 + 1 / 1.5 + 4 / math.sqrt(1.25))
    assert static_offset(0.5, small_config) == pytest.approx(expected, rel=1e-14)


def test_static_offset_without_cage(small_config):
    assert static_offset(0.25, small_config, cage=False) == 2.0


def test_static_offset_diverges(small_config):
    assert static_offset(1e-4, small_config) > 1e3
    assert static_offset(1 - 1e-6, small_config) > 1e6
    for l in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            static_offset(l, small_config)


def test_electron_potential_softened(small_config):
    at_vertex = electron_potential(np.array([[0.0, 0.0, 1.0]]), 0.8, small_config)
    assert np.isfinite(at_vertex).all()
    assert at_vertex[0] < -small_config.z_eff / small_config.delta / 2
    free = electron_potential(
        np.array([[0.0, 0.0, 0.0]]), 0.8, small_config, cage=False
    )
    assert free[0] == pytest.approx(-2 / math.hypot(0.4, small_config.delta))


def test_static_matrix_structure(small_config, small_sample):
    pair = static_electron_matrix(0.4, small_config, sample=small_sample)
    assert pair.kind == MatrixKind.STATIC
    assert pair.dimension == 8
    assert pair.separation == pytest.approx(0.8)
    np.testing.assert_array_equal(pair.hamiltonian, pair.hamiltonian.T)
    np.testing.assert_array_equal(pair.overlap, pair.overlap.T)
    np.testing.assert_allclose(np.diag(pair.overlap), 1.0, rtol=1e-12)
    assert np.all(pair.hamiltonian_errors >= 0)
    assert np.all(pair.overlap_errors >= 0)
    gamma = np.linalg.eigvalsh(pair.overlap)
    assert gamma.min() >= -1e-10 * gamma.max()


def test_static_matrix_antipodal_overlaps(small_config, small_sample):
    pair = static_electron_matrix(0.4, small_config, sample=small_sample)
    axial = (_index(pair, "d+3"), _index(pair, "d-3"))
    equatorial = (_index(pair, "d+1"), _index(pair, "d-1"))
    difference = abs(pair.overlap[axial] - pair.overlap[equatorial])
    tolerance = 3 * (pair.overlap_errors[axial] + pair.overlap_errors[equatorial])
    assert difference <= tolerance + 1e-14


def test_static_matrix_equatorial_symmetry(small_config, small_sample):
    pair = static_electron_matrix(0.4, small_config, sample=small_sample)
    reference = _index(pair, "d+1")
    s1 = _index(pair, "s1")
    for label in ("d-1", "d+2", "d-2"):
        other = _index(pair, label)
        cases = (((reference,) * 2, (other,) * 2), ((s1, reference), (s1, other)))
        for first, second in cases:
            difference = abs(pair.hamiltonian[first] - pair.hamiltonian[second])
            tolerance = 3 * (
                pair.hamiltonian_errors[first] + pair.hamiltonian_errors[second]
            )
            assert difference <= tolerance


def test_molecule_matrix(small_config, small_sample):
    pair = static_electron_matrix(0.4, small_config, cage=False, sample=small_sample)
    assert pair.kind == MatrixKind.MOLECULE
    assert pair.labels == ["s1", "s2"]
    assert pair.overlap[0, 1] == pytest.approx(pair.overlap[1, 0])
    np.testing.assert_allclose(np.diag(pair.overlap), 1.0, rtol=1e-12)


def test_molecule_matrix_drops_the_vertices(small_config, small_sample):
    caged = static_electron_matrix(0.4, small_config, sample=small_sample)
    free = static_electron_matrix(0.4, small_config, cage=False, sample=small_sample)
    np.testing.assert_allclose(free.overlap, caged.overlap[:2, :2], rtol=1e-12)
    assert np.all(free.hamiltonian.diagonal() > caged.hamiltonian.diagonal()[:2])


def test_static_matrix_rejects_separation(small_config, small_sample):
    with pytest.raises(ValueError):
        static_electron_matrix(0.0, small_config, sample=small_sample)
    with pytest.raises(ValueError):
        static_electron_matrix(0.96, small_config, sample=small_sample)


def test_static_matrix_deterministic(small_config):
    first = static_electron_matrix(0.3, small_config)
    second = static_electron_matrix(0.3, small_config)
    np.testing.assert_array_equal(first.hamiltonian, second.hamiltonian)


def test_dynamic_matrix_structure(small_config, small_sample):
    pair = dynamic_matrix(small_config, small_sample)
    assert pair.kind == MatrixKind.DYNAMIC
    assert pair.dimension == 16
    assert pair.labels[8] == "s1:P1"
    np.testing.assert_array_equal(pair.hamiltonian, pair.hamiltonian.T)
    np.testing.assert_array_equal(pair.overlap, pair.overlap.T)
    expected = np.repeat([1.9 / (2 * n + 1) for n in range(2)], 8)
    np.testing.assert_allclose(np.diag(pair.overlap), expected, rtol=1e-12)
    assert pair.z_overlaps.shape == (4, 8, 8)
    assert pair.z_nodes.shape == (4,)
    gamma = np.linalg.eigvalsh(pair.overlap)
    assert gamma.min() >= -1e-10 * gamma.max()


def test_dynamic_sixty_four_states(small_config, small_sample):
    config = small_config.with_updates(n_legendre=8, **{"quadrature.z_points": 8})
    pair = dynamic_matrix(config, small_sample)
    assert pair.dimension == 64
    assert len(pair.labels) == 64


def _single_polynomial(config, z_kinetic="full"):
    return config.with_updates(n_legendre=1, z_kinetic=z_kinetic)


def test_dynamic_single_polynomial_is_averaged_static(small_config, small_sample):
    config = _single_polynomial(small_config)
    nodes, weights = z_nodes(config)
    slices = [z_slice(z, w, config, small_sample) for z, w in zip(nodes, weights)]
    pair = combine_slices(slices, config)
    kappa, mass = config.kappa, config.mass_ratio
    expected = sum(
        item.weight
        * (
            kappa * item.kinetic
            + item.potential
            + item.offset * item.overlap
            + 2 * kappa * mass * item.z_kinetic
        )
        for item in slices
    )
    np.testing.assert_allclose(
        pair.hamiltonian, 0.5 * (expected + expected.T), rtol=1e-12, atol=1e-10
    )


def test_polynomial_only_drops_orbital_derivatives(small_config, small_sample):
    config = _single_polynomial(small_config, "polynomial_only")
    nodes, weights = z_nodes(config)
    slices = [z_slice(z, w, config, small_sample) for z, w in zip(nodes, weights)]
    pair = combine_slices(slices, config)
    expected = sum(
        item.weight
        * (config.kappa * item.kinetic + item.potential + item.offset * item.overlap)
        for item in slices
    )
    np.testing.assert_allclose(
        pair.hamiltonian, 0.5 * (expected + expected.T), rtol=1e-12, atol=1e-10
    )


def test_slice_order_does_not_matter(small_config, small_sample):
    nodes, weights = z_nodes(small_config)
    slices = [z_slice(z, w, small_config, small_sample) for z, w in zip(nodes, weights)]
    forward = combine_slices(slices, small_config)
    backward = combine_slices(slices[::-1], small_config)
    np.testing.assert_array_equal(forward.hamiltonian, backward.hamiltonian)


def test_more_polynomials_never_raise_ground_level(small_config, small_sample):
    one = solve(dynamic_matrix(_single_polynomial(small_config), small_sample))
    two = solve(dynamic_matrix(small_config, small_sample))
    assert two.eigenvalues[0] <= one.eigenvalues[0] + 1e-10


def test_ground_level_non_increasing_in_polynomials(small_config, small_sample):
    config = small_config.with_updates(**{"quadrature.z_points": 8})
    nodes, weights = z_nodes(config)
    slices = [z_slice(z, w, config, small_sample) for z, w in zip(nodes, weights)]
    lowest = []
    for n in (2, 4, 6, 8):
        pair = combine_slices(slices, config.with_updates(n_legendre=n))
        assert pair.dimension == 8 * n
        lowest.append(solve(pair, config.overlap_threshold).eigenvalues[0])
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(lowest, lowest[1:]))


@pytest.mark.parametrize("z", [0.2, 1.1])
def test_weak_form_blocks_are_positive_semidefinite(small_config, small_sample, z):
    blocks = z_slice(z, 1.0, small_config, small_sample)
    for block in (blocks.overlap, blocks.kinetic, blocks.z_kinetic):
        eigenvalues = np.linalg.eigvalsh(0.5 * (block + block.T))
        assert eigenvalues.min() >= -1e-12 * np.abs(eigenvalues).max()


def test_fixed_normalization_mode(small_config, small_sample):
    config = small_config.with_updates(normalize_per_z=False)
    pair = dynamic_matrix(config, small_sample)
    np.testing.assert_array_equal(pair.overlap, pair.overlap.T)
    assert np.all(np.isfinite(pair.hamiltonian))


def test_matrix_pair_shape_validation():
    with pytest.raises(ValidationError):
        MatrixPair(hamiltonian=np.eye(2), overlap=np.eye(3))
    with pytest.raises(ValidationError):
        MatrixPair(hamiltonian=np.ones((2, 3)), overlap=np.ones((2, 3)))
