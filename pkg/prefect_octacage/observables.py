"""
Reported quantities: filled-level energies along a separation sweep, projected
densities of the separation and collision probabilities.
"""

import math
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
from prefect.logging import get_logger
from pydantic import BaseModel, Field
from scipy.interpolate import CubicSpline

from prefect_octacage.assembly import (
    MatrixPair,
    static_electron_matrix,
    static_level_error,
    static_offset,
    volume_sample,
)
from prefect_octacage.basis import mapped_legendre
from prefect_octacage.config import CageConfig
from prefect_octacage.eigensolver import Spectrum, solve
from prefect_octacage.geometry import units_to_ev
from prefect_octacage.quadrature import VolumeSample

STATIC_LEVELS = 8
CONVERGENCE_DELTAS = (1e-2, 1e-3, 1e-4)
CONVERGENCE_POINT_FRACTIONS = (0.25, 0.5, 1.0)

logger = get_logger("octacage.observables")


class SweepKind(str, Enum):
    """
    Static sweeps with the cage, or of the isolated molecule.
    """

    STATIC = "static"
    MOLECULE = "molecule"


def sweep_columns(kind: SweepKind) -> List[str]:
    """
    Column names of a sweep table.
    """
    if SweepKind(kind) == SweepKind.MOLECULE:
        return ["l", "lambda_1", "lambda_2", "H0", "E1", "E2"]
    levels = [f"lambda_{index}" for index in range(1, STATIC_LEVELS + 1)]
    return ["l", *levels, "H0", "E1", "E2", "E16"]


class SweepTable(BaseModel):
    """
    One row of levels and filling energies per half-separation.
    """

    kind: SweepKind = Field(default=SweepKind.STATIC, description="Sweep kind.")
    columns: List[str] = Field(default=..., description="Column names.")
    rows: List[List[float]] = Field(default_factory=list, description="Table body.")

    def column(self, name: str) -> np.ndarray:
        """
        Values of one column in row order.
        """
        index = self.columns.index(name)
        return np.array([row[index] for row in self.rows])


class ProjectedDensity(BaseModel):
    """
    Probability density of the separation for one level or a summed multiplet.
    """

    levels: List[int] = Field(default=..., description="One-based level indices.")
    z: np.ndarray = Field(default=..., description="Ascending separation grid.")
    values: np.ndarray = Field(default=..., description="Density at every z.")

    class Config:
        arbitrary_types_allowed = True

    @property
    def level(self) -> int:
        """
        The (first) level of the density.
        """
        return self.levels[0]


class CollisionTable(BaseModel):
    """
    Density at the collision separation for every retained level.
    """

    z0: float = Field(default=..., description="Collision separation.")
    levels: List[int] = Field(default=..., description="One-based level indices.")
    eigenvalues: List[float] = Field(default=..., description="Level energies.")
    psi0_sq: List[float] = Field(default=..., description="Density at z0.")
    first_collision_level: int = Field(
        default=..., description="First level reaching the collision fraction."
    )
    gap: float = Field(
        default=..., description="Energy of that level above the ground state."
    )
    gap_ev: float = Field(default=..., description="The gap in eV.")


class ConvergenceRow(BaseModel):
    """
    Lowest static level under one quadrature setting.
    """

    parameter: str
    value: float
    lambda_1: float
    lambda_1_error: float


def filling_energy(eigenvalues: Sequence[float], h0: float, electrons: int) -> float:
    """
    Energy of `electrons` electrons filling the lowest levels plus the static offset.

    One electron occupies the lowest level; an even count doubly occupies the lowest
    `electrons / 2` levels.

    Args:
        eigenvalues: Ascending one-electron levels.
        h0: Static offset.
        electrons: 1 or an even number.

    Returns:
        `lambda_1 + h0`, or `2 sum_{i <= K/2} lambda_i + h0`.

    Example:
        ```python
        from prefect_octacage.observables import filling_energy

        filling_energy([-5.0, -3.0], 10.0, 2)  # 0.0
        ```
    """
    if electrons == 1:
        return float(eigenvalues[0]) + h0
    if electrons < 2 or electrons % 2:
        raise ValueError(f"Electron count must be 1 or even, got {electrons!r}.")
    occupied = electrons // 2
    if occupied > len(eigenvalues):
        raise ValueError(
            f"{electrons} electrons need {occupied} levels, "
            f"only {len(eigenvalues)} are available."
        )
    return math.fsum([2.0 * float(value) for value in eigenvalues[:occupied]] + [h0])


def check_l_grid(l_grid: Sequence[float], config: CageConfig):
    """
    Rejects half-separations outside `(0, z_max / 2]`.
    """
    for l in l_grid:
        if not 0 < l <= 0.5 * config.z_max:
            raise ValueError(
                f"Sweep point l = {l!r} outside (0, z_max / 2 = {0.5 * config.z_max}]."
            )


def sweep_point(
    l: float,
    config: CageConfig,
    cage: bool = True,
    sample: Optional[VolumeSample] = None,
) -> List[float]:
    """
    One sweep row: assemble, solve and fill at half-separation `l`.

    Levels removed by overlap filtering are reported as `nan`.
    """
    pair = static_electron_matrix(l, config, cage=cage, sample=sample)
    spectrum = solve(pair, config.overlap_threshold)
    h0 = static_offset(l, config, cage=cage)
    n_levels = STATIC_LEVELS if cage else 2
    levels = [float(value) for value in spectrum.eigenvalues[:n_levels]]
    if len(levels) < n_levels:
        logger.warning(
            "Only %d levels retained at l = %s; missing levels are reported as nan",
            len(levels),
            l,
        )
    padded = levels + [math.nan] * (n_levels - len(levels))

    def fill(electrons):
        if electrons // 2 > len(levels):
            return math.nan
        return filling_energy(levels, h0, electrons)

    if cage:
        return [float(l), *padded, h0, fill(1), fill(2), fill(16)]
    return [float(l), *padded, h0, fill(1), fill(2)]


def _sweep(l_grid, config, cage, sample) -> SweepTable:
    check_l_grid(l_grid, config)
    sample = sample or volume_sample(config)
    kind = SweepKind.STATIC if cage else SweepKind.MOLECULE
    rows = [sweep_point(l, config, cage=cage, sample=sample) for l in l_grid]
    return SweepTable(kind=kind, columns=sweep_columns(kind), rows=rows)


def static_sweep(
    l_grid: Sequence[float],
    config: CageConfig,
    sample: Optional[VolumeSample] = None,
) -> SweepTable:
    """
    Levels `lambda_1 ... lambda_8`, `H0` and the one, two and sixteen electron
    energies over a grid of half-separations.
    """
    return _sweep(l_grid, config, True, sample)


def molecule_sweep(
    l_grid: Sequence[float],
    config: CageConfig,
    sample: Optional[VolumeSample] = None,
) -> SweepTable:
    """
    The same sweep without the cage: no vertex charges, s-orbitals only, so
    `H0 = 1 / (2 l)` and `E2 = 2 lambda_1 + 1 / (2 l)`.
    """
    return _sweep(l_grid, config, False, sample)


def _overlap_interpolant(pair: MatrixPair) -> CubicSpline:
    if pair.z_nodes is None or pair.z_overlaps is None:
        raise ValueError("Projected densities need a dynamic matrix pair.")
    return CubicSpline(pair.z_nodes, pair.z_overlaps, axis=0)


def _check_levels(spectrum: Spectrum, levels: Sequence[int]):
    for level in levels:
        if not 1 <= level <= spectrum.n_levels:
            raise ValueError(
                f"Level {level!r} out of range 1..{spectrum.n_levels}."
            )


def _densities(
    spectrum: Spectrum, pair: MatrixPair, levels: Sequence[int], z_grid
) -> np.ndarray:
    """
    Densities of several levels on `z_grid`, shape `(len(levels), len(z_grid))`.
    """
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=float))
    n_legendre = pair.n_legendre
    coefficients = spectrum.coefficients[:, [level - 1 for level in levels]]
    coefficients = coefficients.reshape(n_legendre, pair.n_orbitals, len(levels))
    legendre, _ = mapped_legendre(n_legendre, z_grid, pair.z_max)
    amplitudes = np.einsum("nak,ng->kga", coefficients, legendre)
    overlaps = _overlap_interpolant(pair)(z_grid)
    return np.einsum("kga,gab,kgb->kg", amplitudes, overlaps, amplitudes)


def projected_density(
    spectrum: Spectrum,
    pair: MatrixPair,
    level: int,
    z_grid=None,
    config: Optional[CageConfig] = None,
) -> ProjectedDensity:
    """
    Projected squared wave function of one level on the separation axis.

    Evaluates `sum c_an c_bm P_n(z) P_m(z) <chi_a chi_b>(z)` with the electron
    overlap blocks interpolated (cubic) from the separation nodes.

    Args:
        spectrum: Spectrum of a dynamic pair.
        pair: The dynamic pair, for its per-node overlap blocks.
        level: One-based level index.
        z_grid: Output grid; defaults to `density.grid_points` values on `[0, z_max]`.
        config: Supplies the default grid.

    Returns:
        The density of the level.
    """
    return multiplet_density(spectrum, pair, [level], z_grid, config)


def multiplet_density(
    spectrum: Spectrum,
    pair: MatrixPair,
    levels: Sequence[int],
    z_grid=None,
    config: Optional[CageConfig] = None,
) -> ProjectedDensity:
    """
    Summed density of several levels, invariant under rotations inside a
    degenerate multiplet.
    """
    levels = [int(level) for level in levels]
    _check_levels(spectrum, levels)
    if z_grid is None:
        if config is None:
            raise ValueError("Either z_grid or config is required.")
        z_grid = config.z_grid()
    z_grid = np.asarray(z_grid, dtype=float)
    values = _densities(spectrum, pair, levels, z_grid).sum(axis=0)
    return ProjectedDensity(levels=levels, z=z_grid, values=values)


def collision_table(
    spectrum: Spectrum, pair: MatrixPair, config: CageConfig
) -> CollisionTable:
    """
    Density at `collision_z0` for every retained level, in ascending energy.

    The first collision level is the first whose density reaches
    `collision_fraction` of the largest one; its gap above the ground state is
    also reported in eV.
    """
    levels = list(range(1, spectrum.n_levels + 1))
    psi0_sq = _densities(spectrum, pair, levels, [config.collision_z0])[:, 0]
    cutoff = config.collision_fraction * psi0_sq.max()
    first = int(np.argmax(psi0_sq >= cutoff))
    gap = float(spectrum.eigenvalues[first] - spectrum.eigenvalues[0])
    logger.info(
        "First collision level %d at %.6g units above the ground state",
        first + 1,
        gap,
    )
    return CollisionTable(
        z0=config.collision_z0,
        levels=levels,
        eigenvalues=[float(value) for value in spectrum.eigenvalues],
        psi0_sq=[float(value) for value in psi0_sq],
        first_collision_level=first + 1,
        gap=gap,
        gap_ev=units_to_ev(gap, config.a_angstrom),
    )


def level_error(spectrum: Spectrum, pair: MatrixPair, level: int = 1) -> float:
    """
    First-order error of one eigenvalue propagated from the element error estimates,
    `sqrt(sum_ab (c_a c_b)^2 (dH_ab^2 + lambda^2 dS_ab^2))`.

    The elements are treated as independent. For static levels
    `static_level_error` accounts for the shared node sample.
    """
    if pair.hamiltonian_errors is None or pair.overlap_errors is None:
        raise ValueError("The matrix pair carries no error estimates.")
    coefficients = spectrum.coefficients[:, level - 1]
    value = float(spectrum.eigenvalues[level - 1])
    weights = np.outer(coefficients, coefficients) ** 2
    variance = weights * (
        pair.hamiltonian_errors**2 + value**2 * pair.overlap_errors**2
    )
    return float(np.sqrt(variance.sum()))


def convergence_point(
    parameter: str, value: float, config: CageConfig
) -> ConvergenceRow:
    """
    Lowest static level at `sweep.reference_l` with one quadrature setting replaced.

    Args:
        parameter: `delta` or `points`.
        value: New softening length or node count.
        config: Base configuration.
    """
    if parameter == "delta":
        varied = config.with_updates(**{"quadrature.delta": value})
    elif parameter == "points":
        varied = config.with_updates(**{"quadrature.points": int(value)})
    else:
        raise ValueError(f"Unknown convergence parameter {parameter!r}.")
    pair = static_electron_matrix(config.sweep.reference_l, varied)
    spectrum = solve(pair, varied.overlap_threshold)
    return ConvergenceRow(
        parameter=parameter,
        value=value,
        lambda_1=float(spectrum.eigenvalues[0]),
        lambda_1_error=static_level_error(
            config.sweep.reference_l,
            spectrum.coefficients[:, 0],
            float(spectrum.eigenvalues[0]),
            varied,
        ),
    )


def convergence_settings(config: CageConfig) -> List[tuple]:
    """
    The `(parameter, value)` pairs of the convergence study.
    """
    settings = [("delta", delta) for delta in CONVERGENCE_DELTAS]
    settings += [
        ("points", float(max(1, int(config.quadrature.points * fraction))))
        for fraction in CONVERGENCE_POINT_FRACTIONS
    ]
    return settings


def convergence_rows(config: CageConfig) -> List[ConvergenceRow]:
    """
    Sensitivity of `lambda_1` to the Coulomb softening and to the node count.
    """
    return [
        convergence_point(parameter, value, config)
        for parameter, value in convergence_settings(config)
    ]
