import pytest
from prefect.testing.utilities import prefect_test_harness

from prefect_octacage.assembly import volume_sample
from prefect_octacage.config import parse_config

SMALL_CONFIG = """
r1 = 0.25
r2 = 0.35
n_legendre = 2
quadrature.points = 3000
quadrature.seed = 11
quadrature.z_points = 4
sweep.l_points = 2
density.grid_points = 9
"""


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run the full-size acceptance calculations.",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session", autouse=True)
def prefect_db():
    """
    Sets up test harness for temporary DB during test runs.
    """
    with prefect_test_harness():
        yield


@pytest.fixture(autouse=True)
def reset_object_registry():
    """
    Ensures each test has a clean object registry.
    """
    from prefect.context import PrefectObjectRegistry

    with PrefectObjectRegistry():
        yield


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """
    Removes stray configuration overrides from the environment.
    """
    import os

    for name in list(os.environ):
        if name.upper().startswith("OCTACAGE_"):
            monkeypatch.delenv(name)


@pytest.fixture
def small_config():
    return parse_config(SMALL_CONFIG, environ={})


@pytest.fixture
def small_sample(small_config):
    return volume_sample(small_config)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SMALL_CONFIG)
    return path
