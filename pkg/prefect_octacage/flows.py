"""Prefect flows behind the CLI subcommands"""

import time
from pathlib import Path
from typing import List, Optional, Sequence

from prefect import flow, task
from prefect.logging import get_run_logger

from prefect_octacage.assembly import (
    MatrixPair,
    ZSlice,
    combine_slices,
    volume_sample,
    z_nodes,
    z_slice,
)
from prefect_octacage.config import CageConfig, config_hash
from prefect_octacage.eigensolver import Spectrum, multiplets, solve
from prefect_octacage.geometry import units_to_ev
from prefect_octacage.observables import (
    ConvergenceRow,
    SweepKind,
    SweepTable,
    check_l_grid,
    collision_table,
    convergence_point,
    convergence_settings,
    level_error,
    multiplet_density,
    sweep_columns,
    sweep_point,
)
from prefect_octacage.results import (
    RunManifest,
    load_matrix_pair,
    load_spectrum,
    save_matrix_pair,
    save_spectrum,
    write_manifest,
    write_table,
)


@task
def static_point(l: float, config: CageConfig, cage: bool = True) -> List[float]:
    """
    Computes one sweep row at half-separation `l`.
    """
    logger = get_run_logger()
    kind = "static" if cage else "molecule"
    logger.info("Assembling the %s problem at l = %s", kind, l)
    return sweep_point(l, config, cage=cage, sample=volume_sample(config))


@task
def dynamic_slice(z: float, weight: float, config: CageConfig) -> ZSlice:
    """
    Integrates the electron blocks at one separation node.
    """
    logger = get_run_logger()
    logger.info("Integrating electron blocks at z = %s", z)
    return z_slice(z, weight, config, volume_sample(config))


@task
def convergence_case(
    parameter: str, value: float, config: CageConfig
) -> ConvergenceRow:
    """
    Solves the reference static problem with one quadrature setting replaced.
    """
    logger = get_run_logger()
    logger.info("Convergence case %s = %s", parameter, value)
    return convergence_point(parameter, value, config)


def _submit_batched(work, arguments: Sequence[tuple], workers: int) -> list:
    """
    Submits `work` in batches of at most `workers` runs and returns the results in
    input order.
    """
    results = []
    for start in range(0, len(arguments), workers):
        futures = [work.submit(*args) for args in arguments[start : start + workers]]
        results += [future.result() for future in futures]
    return results


def _manifest(
    config: CageConfig,
    subcommand: str,
    outputs: List[Path],
    started: float,
    integrations: int,
    output_dir: Path,
    config_path: Optional[str],
    summary: Optional[dict] = None,
) -> RunManifest:
    manifest = RunManifest(
        config_hash=config_hash(config),
        subcommand=subcommand,
        config_path=config_path,
        outputs=[str(path) for path in outputs],
        wall_time=time.perf_counter() - started,
        quadrature_nodes=volume_sample(config).n_nodes if integrations else 0,
        volume_integrations=integrations,
        summary=summary or {},
    )
    write_manifest(manifest, output_dir)
    return manifest


def _sweep(config: CageConfig, l_grid, cage: bool) -> SweepTable:
    grid = [float(l) for l in (config.l_grid() if l_grid is None else l_grid)]
    check_l_grid(grid, config)
    rows = _submit_batched(
        static_point, [(l, config, cage) for l in grid], config.run.workers
    )
    kind = SweepKind.STATIC if cage else SweepKind.MOLECULE
    return SweepTable(kind=kind, columns=sweep_columns(kind), rows=rows)


@flow(name="static-sweep")
def static_sweep_flow(
    config: CageConfig,
    output_dir: Path = Path("."),
    l_grid: Optional[List[float]] = None,
    config_path: Optional[str] = None,
) -> RunManifest:
    """
    Levels and filling energies of the caged system over a grid of half-separations,
    written to `static_sweep.csv`.

    Args:
        config: Run configuration.
        output_dir: Directory receiving the table and the manifest.
        l_grid: Half-separations; defaults to the configured sweep grid.
        config_path: Recorded in the manifest.

    Returns:
        The run manifest.

    Example:
        ```python
        from prefect_octacage.config import load_config
        from prefect_octacage.flows import static_sweep_flow

        static_sweep_flow(load_config("configs/default.cfg"), output_dir="out")
        ```
    """
    started = time.perf_counter()
    table = _sweep(config, l_grid, cage=True)
    path = write_table(
        Path(output_dir) / "static_sweep.csv",
        table.columns,
        table.rows,
        "static-sweep",
        config,
    )
    return _manifest(
        config,
        "static-sweep",
        [path],
        started,
        len(table.rows),
        output_dir,
        config_path,
    )


@flow(name="molecule")
def molecule_flow(
    config: CageConfig,
    output_dir: Path = Path("."),
    l_grid: Optional[List[float]] = None,
    config_path: Optional[str] = None,
) -> RunManifest:
    """
    The isolated-molecule sweep, written to `molecule_sweep.csv`.
    """
    started = time.perf_counter()
    table = _sweep(config, l_grid, cage=False)
    path = write_table(
        Path(output_dir) / "molecule_sweep.csv",
        table.columns,
        table.rows,
        "molecule",
        config,
    )
    return _manifest(
        config, "molecule", [path], started, len(table.rows), output_dir, config_path
    )


def assemble_dynamic(
    config: CageConfig, cache_dir: Optional[Path] = None
) -> MatrixPair:
    """
    Assembles the dynamic pair from per-node tasks, reusing a cached pair with the
    same config hash from `cache_dir` when one exists. Must run inside a flow.
    """
    logger = get_run_logger()
    cache = None
    if cache_dir is not None:
        cache = Path(cache_dir) / f"dynamic_{config_hash(config)}.npz"
        if cache.exists():
            logger.info("Reusing cached dynamic matrix pair %s", cache)
            return load_matrix_pair(cache)

    nodes, weights = z_nodes(config)
    slices = _submit_batched(
        dynamic_slice,
        [(float(z), float(w), config) for z, w in zip(nodes, weights)],
        config.run.workers,
    )
    pair = combine_slices(slices, config)
    if cache is not None:
        save_matrix_pair(pair, cache)
    return pair


def _solve_dynamic(config: CageConfig, cache_dir: Optional[Path]):
    pair = assemble_dynamic(config, cache_dir)
    logger = get_run_logger()
    cache = None
    if cache_dir is not None:
        cache = Path(cache_dir) / f"dynamic_{config_hash(config)}_spectrum.npz"
        if cache.exists():
            logger.info("Reusing cached spectrum %s", cache)
            return pair, load_spectrum(cache)
    logger.info("Solving the %d-state dynamic problem", pair.dimension)
    spectrum = solve(pair, config.overlap_threshold)
    if cache is not None:
        save_spectrum(spectrum, cache)
    return pair, spectrum


@flow(name="dynamic")
def dynamic_flow(
    config: CageConfig,
    output_dir: Path = Path("."),
    cache_dir: Optional[Path] = None,
    config_path: Optional[str] = None,
) -> RunManifest:
    """
    Spectrum of the dynamic problem and the collision table, written to
    `spectrum.csv` and `collision.csv`.
    """
    started = time.perf_counter()
    logger = get_run_logger()
    pair, spectrum = _solve_dynamic(config, cache_dir)
    output_dir = Path(output_dir)
    spectrum_path = write_table(
        output_dir / "spectrum.csv",
        ["k", "lambda", "lambda_ev"],
        [
            (k, value, units_to_ev(float(value), config.a_angstrom))
            for k, value in enumerate(spectrum.eigenvalues, start=1)
        ],
        "dynamic",
        config,
    )
    table = collision_table(spectrum, pair, config)
    notes = {
        "first_collision_level": table.first_collision_level,
        "gap": table.gap,
        "gap_ev": table.gap_ev,
        "ground_level_error": level_error(spectrum, pair),
    }
    collision_path = write_table(
        output_dir / "collision.csv",
        ["k", "lambda", "psi0_sq"],
        zip(table.levels, table.eigenvalues, table.psi0_sq),
        "dynamic",
        config,
        notes,
    )
    logger.info(
        "First collision level %d, %.4g eV above the ground state",
        table.first_collision_level,
        table.gap_ev,
    )
    return _manifest(
        config,
        "dynamic",
        [spectrum_path, collision_path],
        started,
        config.quadrature.z_points,
        output_dir,
        config_path,
        {key: float(value) for key, value in notes.items()},
    )


def _multiplet_of(spectrum: Spectrum, level: int, tolerance: float) -> List[int]:
    for group in multiplets(spectrum.eigenvalues, atol=tolerance):
        if level - 1 in group:
            return [index + 1 for index in group]
    return [level]


@flow(name="density")
def density_flow(
    config: CageConfig,
    levels: List[int],
    output_dir: Path = Path("."),
    cache_dir: Optional[Path] = None,
    config_path: Optional[str] = None,
) -> RunManifest:
    """
    Projected densities of the requested levels, one `density_level_<k>.csv` each.

    A level that belongs to a degenerate multiplet, neighbouring levels closer than
    `density.degeneracy_tolerance`, also gets the summed density of the multiplet in
    `density_multiplet_<first>-<last>.csv`.
    """
    started = time.perf_counter()
    pair, spectrum = _solve_dynamic(config, cache_dir)
    output_dir = Path(output_dir)
    z_grid = config.z_grid()
    outputs, written = [], set()
    for level in levels:
        density = multiplet_density(spectrum, pair, [level], z_grid)
        outputs.append(
            write_table(
                output_dir / f"density_level_{level}.csv",
                ["z", "density"],
                zip(density.z, density.values),
                "density",
                config,
            )
        )
        group = _multiplet_of(spectrum, level, config.density.degeneracy_tolerance)
        if len(group) > 1 and tuple(group) not in written:
            written.add(tuple(group))
            summed = multiplet_density(spectrum, pair, group, z_grid)
            outputs.append(
                write_table(
                    output_dir / f"density_multiplet_{group[0]}-{group[-1]}.csv",
                    ["z", "density"],
                    zip(summed.z, summed.values),
                    "density",
                    config,
                )
            )
    return _manifest(
        config,
        "density",
        outputs,
        started,
        config.quadrature.z_points,
        output_dir,
        config_path,
    )


@flow(name="convergence")
def convergence_flow(
    config: CageConfig,
    output_dir: Path = Path("."),
    config_path: Optional[str] = None,
) -> RunManifest:
    """
    Lowest static level at `sweep.reference_l` for three softening lengths and three
    node counts, written to `convergence.csv`.
    """
    started = time.perf_counter()
    settings = convergence_settings(config)
    rows = _submit_batched(
        convergence_case,
        [(parameter, value, config) for parameter, value in settings],
        config.run.workers,
    )
    path = write_table(
        Path(output_dir) / "convergence.csv",
        ["parameter", "value", "lambda_1", "lambda_1_error"],
        [(row.parameter, row.value, row.lambda_1, row.lambda_1_error) for row in rows],
        "convergence",
        config,
    )
    return _manifest(
        config, "convergence", [path], started, len(rows), output_dir, config_path
    )
