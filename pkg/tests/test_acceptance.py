from pathlib import Path

import numpy as np
import pytest

from prefect_octacage.assembly import dynamic_matrix, volume_sample
from prefect_octacage.config import load_config
from prefect_octacage.eigensolver import solve
from prefect_octacage.observables import collision_table, molecule_sweep, static_sweep

DEFAULT_CONFIG = Path(__file__).parents[1] / "configs" / "default.cfg"
L_GRID = np.linspace(0.1, 0.95, 20)

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def default_config():
    return load_config(DEFAULT_CONFIG, environ={})


@pytest.fixture(scope="module")
def sweeps(default_config):
    sample = volume_sample(default_config)
    return (
        static_sweep(L_GRID, default_config, sample),
        molecule_sweep(L_GRID, default_config, sample),
    )


def _argmin_l(table, column):
    return float(L_GRID[np.nanargmin(table.column(column))])


@pytest.mark.parametrize("column", ["E1", "E2", "E16"])
def test_caged_minima_stay_below_large_separation(sweeps, column):
    static, _ = sweeps
    assert _argmin_l(static, column) < 0.6


def test_molecule_has_interior_minimum(sweeps):
    _, molecule = sweeps
    index = int(np.nanargmin(molecule.column("E2")))
    assert 0 < index < len(L_GRID) - 1


def test_molecule_minimum_lies_beyond_caged_minimum(sweeps):
    static, molecule = sweeps
    assert _argmin_l(molecule, "E2") > _argmin_l(static, "E2")


@pytest.fixture(scope="module")
def collisions(default_config):
    config = default_config.with_updates(**{"quadrature.points": 40_000})
    pair = dynamic_matrix(config)
    return collision_table(solve(pair, config.overlap_threshold), pair, config)


def test_ground_state_avoids_collision(collisions):
    assert collisions.psi0_sq[0] <= 1e-3 * max(collisions.psi0_sq)


def test_first_collision_level_is_high(collisions):
    assert collisions.first_collision_level > 20
    assert collisions.gap > 0.0
