import json

import numpy as np
import pytest

from prefect_octacage._version import __version__
from prefect_octacage.assembly import MatrixKind, MatrixPair
from prefect_octacage.config import config_hash
from prefect_octacage.eigensolver import solve_generalized
from prefect_octacage.results import (
    MANIFEST_NAME,
    RunManifest,
    load_matrix_pair,
    load_spectrum,
    read_table,
    save_matrix_pair,
    save_spectrum,
    table_body,
    write_manifest,
    write_table,
)


@pytest.fixture
def pair():
    overlap = np.array([[1.0, 0.2], [0.2, 1.0]])
    return MatrixPair(
        kind=MatrixKind.DYNAMIC,
        hamiltonian=np.array([[-1.0, 0.1], [0.1, 2.0]]),
        overlap=overlap,
        hamiltonian_errors=np.full((2, 2), 1e-3),
        overlap_errors=np.zeros((2, 2)),
        labels=["s1:P0", "s2:P0"],
        config_hash="0123456789abcdef",
        n_legendre=1,
        z_max=1.9,
        z_nodes=np.array([0.4, 1.5]),
        z_weights=np.array([0.95, 0.95]),
        z_overlaps=np.stack([overlap, overlap]),
    )


def test_write_and_read_table(tmp_path, small_config):
    path = write_table(
        tmp_path / "nested" / "table.csv",
        ["l", "lambda_1"],
        [(0.1, -2.5), (0.2, 1 / 3)],
        "static-sweep",
        small_config,
    )
    comments, columns, rows = read_table(path)
    assert comments[0] == f"prefect-octacage {__version__}"
    assert "subcommand: static-sweep" in comments
    assert f"config_hash: {config_hash(small_config)}" in comments
    assert "config: r1 = 0.25" in comments
    assert comments[-1].startswith("created: ")
    assert columns == ["l", "lambda_1"]
    assert rows == [["0.1", "-2.5"], ["0.2", repr(1 / 3)]]


def test_table_notes_go_to_the_header(tmp_path, small_config):
    path = write_table(
        tmp_path / "collision.csv",
        ["k", "lambda", "psi0_sq"],
        [(1, -80.0, 0.0)],
        "dynamic",
        small_config,
        {"first_collision_level": 12, "gap_ev": 182.6},
    )
    comments, _, _ = read_table(path)
    assert "first_collision_level: 12" in comments
    assert "gap_ev: 182.6" in comments
    assert table_body(path) == "k,lambda,psi0_sq\n1,-80.0,0.0\n"


def test_table_body_is_deterministic(tmp_path, small_config):
    arguments = (["k", "lambda"], [(1, 0.5), (2, 0.75)], "dynamic", small_config)
    first = write_table(tmp_path / "a.csv", *arguments)
    second = write_table(tmp_path / "b.csv", *arguments)
    assert table_body(first) == table_body(second) == "k,lambda\n1,0.5\n2,0.75\n"


def test_matrix_pair_cache(tmp_path, pair):
    path = save_matrix_pair(pair, tmp_path / "cache" / "pair.npz")
    loaded = load_matrix_pair(path)
    assert loaded.kind == MatrixKind.DYNAMIC
    assert loaded.labels == pair.labels
    assert loaded.config_hash == pair.config_hash
    assert loaded.n_legendre == 1 and loaded.z_max == 1.9
    np.testing.assert_array_equal(loaded.hamiltonian, pair.hamiltonian)
    np.testing.assert_array_equal(loaded.z_overlaps, pair.z_overlaps)


def test_static_pair_cache_without_optional_arrays(tmp_path):
    static = MatrixPair(hamiltonian=np.eye(3), overlap=np.eye(3), separation=0.8)
    loaded = load_matrix_pair(save_matrix_pair(static, tmp_path / "static.npz"))
    assert loaded.kind == MatrixKind.STATIC
    assert loaded.separation == 0.8
    assert loaded.z_nodes is None


def test_spectrum_file(tmp_path, pair):
    spectrum = solve_generalized(pair.hamiltonian, pair.overlap).copy(
        update={"labels": pair.labels}
    )
    loaded = load_spectrum(save_spectrum(spectrum, tmp_path / "spectrum.npz"))
    np.testing.assert_array_equal(loaded.eigenvalues, spectrum.eigenvalues)
    np.testing.assert_array_equal(loaded.coefficients, spectrum.coefficients)
    assert loaded.labels == pair.labels
    assert loaded.retained == 2


def test_manifest(tmp_path):
    manifest = RunManifest(
        config_hash="0123456789abcdef",
        subcommand="dynamic",
        outputs=["spectrum.csv"],
        volume_integrations=4,
    )
    path = write_manifest(manifest, tmp_path)
    assert path.name == MANIFEST_NAME
    stored = json.loads(path.read_text())
    assert stored["subcommand"] == "dynamic"
    assert stored["version"] == __version__
    assert RunManifest.parse_file(path) == manifest
