"""Command line interface: `octacage <subcommand> --config run.cfg`"""

import functools
from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError

from prefect_octacage.config import (
    CageConfig,
    load_config,
    parse_float_list,
)
from prefect_octacage.exceptions import ConfigurationError, NumericalError
from prefect_octacage.flows import (
    convergence_flow,
    density_flow,
    dynamic_flow,
    molecule_flow,
    static_sweep_flow,
)
from prefect_octacage.geometry import Octahedron

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

app = typer.Typer(
    help="Variational eigenstates of two positive charges in an octahedral cage.",
    add_completion=False,
)

CONFIG_OPTION = typer.Option(..., "--config", "-c", help="Flat key = value config.")
OUTPUT_OPTION = typer.Option(Path("."), "--output-dir", "-o", help="Output folder.")
WORKERS_OPTION = typer.Option(
    None, "--workers", help="Override run.workers (results do not depend on it)."
)
CACHE_OPTION = typer.Option(
    None, "--cache-dir", help="Reuse or store the dynamic matrix pair here."
)


def _exit_codes(func):
    """
    Maps errors to exit codes with a one-line diagnostic on stderr.
    """

    @functools.wraps(func)
    def inner(*args, **kwargs):
        """
        Used for decorator.
        """
        try:
            return func(*args, **kwargs)
        except (ConfigurationError, ValidationError) as exc:
            typer.echo(f"configuration error: {exc}", err=True)
            raise typer.Exit(EXIT_CONFIG) from exc
        except NumericalError as exc:
            typer.echo(f"numerical error: {exc}", err=True)
            raise typer.Exit(EXIT_NUMERICAL) from exc
        except OSError as exc:
            typer.echo(f"i/o error: {exc}", err=True)
            raise typer.Exit(EXIT_IO) from exc
        except ValueError as exc:
            typer.echo(f"configuration error: {exc}", err=True)
            raise typer.Exit(EXIT_CONFIG) from exc

    return inner


def _load(config_path: Path, workers: Optional[int]) -> CageConfig:
    config = load_config(config_path)
    if workers is not None:
        config = config.with_updates(**{"run.workers": workers})
    return config


def _parse_levels(text: str) -> List[int]:
    try:
        levels = [int(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"Cannot parse level list {text!r}.") from exc
    if not levels:
        raise ConfigurationError("At least one level is required.")
    return levels


@app.command("static-sweep")
@_exit_codes
def static_sweep(
    config: Path = CONFIG_OPTION,
    output_dir: Path = OUTPUT_OPTION,
    workers: Optional[int] = WORKERS_OPTION,
    l_grid: Optional[str] = typer.Option(
        None, "--l-grid", help="Comma separated half-separations, e.g. 0.3,0.6."
    ),
):
    """
    Levels and 1, 2 and 16 electron energies of the caged system versus l.
    """
    grid = list(parse_float_list(l_grid)) if l_grid else None
    manifest = static_sweep_flow(
        _load(config, workers), output_dir, l_grid=grid, config_path=str(config)
    )
    typer.echo("\n".join(manifest.outputs))


@app.command("molecule")
@_exit_codes
def molecule(
    config: Path = CONFIG_OPTION,
    output_dir: Path = OUTPUT_OPTION,
    workers: Optional[int] = WORKERS_OPTION,
    l_grid: Optional[str] = typer.Option(
        None, "--l-grid", help="Comma separated half-separations, e.g. 0.3,0.6."
    ),
):
    """
    The same sweep for the isolated molecule.
    """
    grid = list(parse_float_list(l_grid)) if l_grid else None
    manifest = molecule_flow(
        _load(config, workers), output_dir, l_grid=grid, config_path=str(config)
    )
    typer.echo("\n".join(manifest.outputs))


@app.command("dynamic")
@_exit_codes
def dynamic(
    config: Path = CONFIG_OPTION,
    output_dir: Path = OUTPUT_OPTION,
    workers: Optional[int] = WORKERS_OPTION,
    cache_dir: Optional[Path] = CACHE_OPTION,
):
    """
    Spectrum of the dynamic problem and its collision table.
    """
    manifest = dynamic_flow(
        _load(config, workers), output_dir, cache_dir, config_path=str(config)
    )
    typer.echo("\n".join(manifest.outputs))


@app.command("density")
@_exit_codes
def density(
    config: Path = CONFIG_OPTION,
    levels: str = typer.Option(..., "--levels", help="Levels, e.g. 1,11,12."),
    output_dir: Path = OUTPUT_OPTION,
    workers: Optional[int] = WORKERS_OPTION,
    cache_dir: Optional[Path] = CACHE_OPTION,
):
    """
    Projected densities of the separation for selected levels.
    """
    manifest = density_flow(
        _load(config, workers),
        _parse_levels(levels),
        output_dir,
        cache_dir,
        config_path=str(config),
    )
    typer.echo("\n".join(manifest.outputs))


@app.command("convergence")
@_exit_codes
def convergence(
    config: Path = CONFIG_OPTION,
    output_dir: Path = OUTPUT_OPTION,
    workers: Optional[int] = WORKERS_OPTION,
):
    """
    Sensitivity of the lowest static level to softening and node count.
    """
    manifest = convergence_flow(
        _load(config, workers), output_dir, config_path=str(config)
    )
    typer.echo("\n".join(manifest.outputs))


@app.command("convert-units")
@_exit_codes
def convert_units(
    units: float = typer.Option(..., "--units", help="Energy in dimensionless units."),
    config: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Take a_angstrom from this config."
    ),
    a_angstrom: Optional[float] = typer.Option(
        None, "--a-angstrom", help="Cage half diagonal in Angstrom."
    ),
):
    """
    Converts a dimensionless energy to eV.
    """
    if config is not None:
        cage = load_config(config).cage
    elif a_angstrom is not None:
        cage = Octahedron(a_angstrom=a_angstrom)
    else:
        cage = Octahedron()
    unit = cage.energy_unit_ev
    typer.echo(
        f"{units:g} units = {units * unit:.1f} eV "
        f"(a = {cage.a_angstrom:g} Angstrom, {unit:.4f} eV/unit)"
    )


if __name__ == "__main__":
    app()
