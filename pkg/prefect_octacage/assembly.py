"""
Hamiltonian and overlap matrices in the raw, non-orthogonal basis.

The static problem freezes the charges at `(0, 0, ±l)` and uses the eight electron
orbitals; the dynamic problem multiplies each orbital with mapped Legendre polynomials
of the separation `z`. All volume integrals of a run share one node sample.
"""

import math
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
from prefect.logging import get_logger
from pydantic import BaseModel, Field, root_validator

from prefect_octacage.basis import (
    OrbitalSet,
    electron_descriptors,
    mapped_legendre,
    product_descriptors,
)
from prefect_octacage.config import CageConfig, ZKinetic, config_hash
from prefect_octacage.geometry import ChargePair, Octahedron
from prefect_octacage.quadrature import (
    QuadratureSpec,
    VolumeSample,
    coulomb,
    gauss_legendre_rule,
    sample_volume,
)

logger = get_logger("octacage.assembly")

UNIT_CAGE = Octahedron()


class MatrixKind(str, Enum):
    """
    The problem a matrix pair belongs to.
    """

    STATIC = "static"
    MOLECULE = "molecule"
    DYNAMIC = "dynamic"


class MatrixPair(BaseModel):
    """
    Symmetric Hamiltonian and overlap matrices with per-element error estimates.

    Dynamic pairs also carry the separation nodes and the electron overlap blocks at
    each node, which the projected densities interpolate.
    """

    kind: MatrixKind = Field(default=MatrixKind.STATIC, description="Problem kind.")
    hamiltonian: np.ndarray = Field(default=..., description="Matrix H.")
    overlap: np.ndarray = Field(default=..., description="Matrix S.")
    hamiltonian_errors: Optional[np.ndarray] = Field(
        default=None, description="Quadrature error estimates of H."
    )
    overlap_errors: Optional[np.ndarray] = Field(
        default=None, description="Quadrature error estimates of S."
    )
    labels: List[str] = Field(default_factory=list, description="Basis labels.")
    config_hash: str = Field(default="", description="Hash of the producing config.")
    separation: Optional[float] = Field(
        default=None, description="Charge separation z of a static pair."
    )
    n_legendre: Optional[int] = Field(
        default=None, description="Number of Legendre factors of a dynamic pair."
    )
    z_max: Optional[float] = Field(
        default=None, description="Separation cutoff of a dynamic pair."
    )
    z_nodes: Optional[np.ndarray] = Field(
        default=None, description="Gauss-Legendre nodes of the separation integral."
    )
    z_weights: Optional[np.ndarray] = Field(
        default=None, description="Weights belonging to `z_nodes`."
    )
    z_overlaps: Optional[np.ndarray] = Field(
        default=None, description="Electron overlap blocks at every node."
    )

    class Config:
        arbitrary_types_allowed = True

    @root_validator(skip_on_failure=True)
    def check_shapes(cls, values):
        """
        Both matrices must be square and of equal dimension.
        """
        hamiltonian = np.asarray(values["hamiltonian"], dtype=float)
        overlap = np.asarray(values["overlap"], dtype=float)
        if hamiltonian.ndim != 2 or hamiltonian.shape[0] != hamiltonian.shape[1]:
            raise ValueError("hamiltonian must be a square matrix.")
        if overlap.shape != hamiltonian.shape:
            raise ValueError("overlap and hamiltonian must have the same shape.")
        values["hamiltonian"], values["overlap"] = hamiltonian, overlap
        return values

    @property
    def dimension(self) -> int:
        """
        Number of raw basis functions.
        """
        return self.hamiltonian.shape[0]

    @property
    def n_orbitals(self) -> int:
        """
        Number of electron orbitals per Legendre factor.
        """
        return self.dimension // (self.n_legendre or 1)


class ZSlice(BaseModel):
    """
    Electron blocks at one separation node.

    With `chi` the normalized orbitals at separation `z`, the blocks are
    `overlap = <chi_a chi_b>`, `kinetic = <grad chi_a . grad chi_b>`,
    `potential = <chi_a v_e chi_b>`, `drift = <d_z chi_a chi_b>` and
    `z_kinetic = <d_z chi_a d_z chi_b>`; `offset` is the electron-free energy
    `V0(z)`. Every block has an error block in `errors` under the same name.
    """

    z: float
    weight: float
    overlap: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    drift: np.ndarray
    z_kinetic: np.ndarray
    offset: float
    errors: dict

    class Config:
        arbitrary_types_allowed = True


@lru_cache(maxsize=4)
def _cached_sample(spec_json: str) -> VolumeSample:
    return sample_volume(QuadratureSpec.parse_raw(spec_json), 1.0, stream=0)


def volume_sample(config: CageConfig) -> VolumeSample:
    """
    The node sample shared by every integral of a run with this configuration.
    """
    return _cached_sample(config.quadrature.json())


def _check_half_separation(l: float, config: CageConfig):
    if not 0 < 2 * l <= config.z_max:
        raise ValueError(
            f"Half-separation must satisfy 0 < 2l <= z_max = {config.z_max}, got {l!r}."
        )


def electron_potential(
    points: np.ndarray, z: float, config: CageConfig, cage: bool = True
) -> np.ndarray:
    """
    Softened potential energy of the electron at `points`.

    Args:
        points: Electron positions, shape `(..., 3)`.
        z: Charge separation.
        config: Run configuration.
        cage: Whether the vertex atoms attract the electron.

    Returns:
        `-sum_j coulomb(|x - y_j|) - Z_eff sum_k coulomb(|x - p_k|)`.
    """
    points = np.asarray(points, dtype=float)
    potential = np.zeros(points.shape[:-1])
    for charge in ChargePair(separation=z).positions:
        potential -= coulomb(np.linalg.norm(points - charge, axis=-1), config.delta)
    if cage:
        for atom in UNIT_CAGE.vertices:
            potential -= config.z_eff * coulomb(
                np.linalg.norm(points - atom, axis=-1), config.delta
            )
    return potential


def static_offset(l: float, config: CageConfig, cage: bool = True) -> float:
    """
    Electron-independent energy of the frozen charges, without softening.

    Args:
        l: Half-separation of the charges.
        config: Run configuration.
        cage: Whether the vertex atoms repel the charges.

    Returns:
        `1 / (2 l) + Z_eff sum_{j,k} 1 / |y_j - p_k|`.

    Example:
        ```python
        from prefect_octacage.assembly import static_offset
        from prefect_octacage.config import CageConfig

        config = CageConfig(r1=0.25, r2=0.35)
        static_offset(0.5, config)  # 125.888...
        ```
    """
    if not 0 < l < 1:
        raise ValueError(f"Half-separation must lie in (0, 1), got {l!r}.")
    terms = [1.0 / (2.0 * l)]
    if cage:
        for charge in ChargePair(separation=2.0 * l).positions:
            for atom in UNIT_CAGE.vertices:
                terms.append(config.z_eff / float(np.linalg.norm(charge - atom)))
    return math.fsum(terms)


def _charge_offset(z: float, config: CageConfig) -> float:
    """
    Softened electron-free energy `V0(z)` of the dynamic problem.
    """
    terms = [float(coulomb(z, config.delta))]
    for charge in ChargePair(separation=z).positions:
        for atom in UNIT_CAGE.vertices:
            terms.append(
                config.z_eff
                * float(coulomb(np.linalg.norm(charge - atom), config.delta))
            )
    return math.fsum(terms)


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def static_electron_matrix(
    l: float,
    config: CageConfig,
    cage: bool = True,
    sample: Optional[VolumeSample] = None,
) -> MatrixPair:
    """
    Static electron problem at half-separation `l`.

    Args:
        l: Half-separation; the charges sit at `(0, 0, ±l)`.
        config: Run configuration.
        cage: `False` drops the vertex atoms and their d-orbitals, leaving the
            isolated molecule in the same integration volume.
        sample: Volume nodes; defaults to the shared sample of `config`.

    Returns:
        An 8x8 pair (2x2 without the cage) with
        `H = kappa <grad chi_a . grad chi_b> + <chi_a v_e chi_b>`.
    """
    _check_half_separation(l, config)
    sample = sample or volume_sample(config)
    separation = 2.0 * l
    orbitals = OrbitalSet(config.orbital_parameters(), separation, include_d=cage)
    orbitals.normalize(sample)

    def integrand(points):
        phi = orbitals.values(points)
        grad = orbitals.gradients(points)
        potential = electron_potential(points, separation, config, cage)
        overlap = phi[:, None, :] * phi[None, :, :]
        kinetic = np.einsum("apk,bpk->abp", grad, grad)
        return np.stack([overlap, kinetic, overlap * potential])

    logger.debug("Integrating static blocks at l = %s (cage=%s)", l, cage)
    result = sample.integrate(integrand)
    overlap, kinetic, potential = result.value
    overlap_error, kinetic_error, potential_error = result.error_estimate

    return MatrixPair(
        kind=MatrixKind.STATIC if cage else MatrixKind.MOLECULE,
        hamiltonian=_symmetrize(config.kappa * kinetic + potential),
        overlap=_symmetrize(overlap),
        hamiltonian_errors=config.kappa * kinetic_error + potential_error,
        overlap_errors=overlap_error,
        labels=[descriptor.label for descriptor in orbitals.descriptors],
        config_hash=config_hash(config),
        separation=separation,
    )


def static_level_error(
    l: float,
    coefficients: np.ndarray,
    eigenvalue: float,
    config: CageConfig,
    cage: bool = True,
    sample: Optional[VolumeSample] = None,
) -> float:
    """
    Quadrature error of one static level.

    To first order a level moves by `c^T (dH - lambda dS) c`, which is the error of
    the single integral of `kappa |grad psi|^2 + (v_e - lambda) psi^2` with
    `psi = sum_a c_a chi_a`. Every element is integrated on the same nodes, so the
    error is estimated for that integral directly rather than element by element.

    Args:
        l: Half-separation of the pair the level was solved from.
        coefficients: Eigenvector in the raw basis of `static_electron_matrix`.
        eigenvalue: The level.
        config: Run configuration.
        cage: As for `static_electron_matrix`.
        sample: Volume nodes; defaults to the shared sample of `config`.

    Returns:
        The standard error (Monte Carlo) or embedded-rule difference (product Gauss).
    """
    _check_half_separation(l, config)
    sample = sample or volume_sample(config)
    separation = 2.0 * l
    orbitals = OrbitalSet(config.orbital_parameters(), separation, include_d=cage)
    orbitals.normalize(sample)
    coefficients = np.asarray(coefficients, dtype=float)

    def integrand(points):
        psi = coefficients @ orbitals.values(points)
        grad = np.einsum("a,apk->pk", coefficients, orbitals.gradients(points))
        potential = electron_potential(points, separation, config, cage)
        return config.kappa * np.einsum("pk,pk->p", grad, grad) + (
            potential - eigenvalue
        ) * (psi * psi)

    return float(sample.integrate(integrand).error_estimate)


def reference_normalizations(
    config: CageConfig, sample: Optional[VolumeSample] = None
) -> np.ndarray:
    """
    Orbital normalizations at `z_max / 2`, used when `normalize_per_z` is off.
    """
    sample = sample or volume_sample(config)
    orbitals = OrbitalSet(config.orbital_parameters(), 0.5 * config.z_max)
    return orbitals.normalize(sample).normalizations


def z_nodes(config: CageConfig):
    """
    Gauss-Legendre nodes and weights of the separation integral on `[0, z_max]`.
    """
    return gauss_legendre_rule((0.0, config.z_max), config.quadrature.z_points)


def z_slice(
    z: float,
    weight: float,
    config: CageConfig,
    sample: Optional[VolumeSample] = None,
) -> ZSlice:
    """
    Electron blocks of the dynamic problem at the separation node `z`.

    Args:
        z: Separation node.
        weight: Its Gauss-Legendre weight.
        config: Run configuration.
        sample: Volume nodes; defaults to the shared sample of `config`.

    Returns:
        The blocks with their error estimates.
    """
    sample = sample or volume_sample(config)
    orbitals = OrbitalSet(config.orbital_parameters(), z)
    if config.normalize_per_z:
        orbitals.normalize(sample)
    else:
        orbitals.with_normalizations(reference_normalizations(config, sample))

    def integrand(points):
        phi = orbitals.values(points)
        grad = orbitals.gradients(points)
        dphi = orbitals.z_derivatives(points)
        potential = electron_potential(points, z, config)
        overlap = phi[:, None, :] * phi[None, :, :]
        return np.stack(
            [
                overlap,
                np.einsum("apk,bpk->abp", grad, grad),
                overlap * potential,
                dphi[:, None, :] * phi[None, :, :],
                dphi[:, None, :] * dphi[None, :, :],
            ]
        )

    logger.debug("Integrating dynamic blocks at z = %s", z)
    result = sample.integrate(integrand)
    names = ("overlap", "kinetic", "potential", "drift", "z_kinetic")
    blocks = dict(zip(names, result.value))
    errors = dict(zip(names, result.error_estimate))
    return ZSlice(
        z=float(z),
        weight=float(weight),
        offset=_charge_offset(z, config),
        errors=errors,
        **blocks,
    )


def combine_slices(slices: Sequence[ZSlice], config: CageConfig) -> MatrixPair:
    """
    Reduces per-node electron blocks to the dynamic pair.

    With `P_n` the mapped Legendre polynomials and `w_q` the node weights,
    ```
    H[(n,a),(m,b)] = sum_q w_q [P_n P_m (kappa T + V_e + V0 S)
                     + 2 kappa mu (P_n P_m DD + P_n P_m' D_ab + P_n' P_m D_ba
                     + P_n' P_m' S)]
    ```
    where `polynomial_only` drops the orbital derivative terms `DD` and `D`.
    Row and column index is `n * n_orbitals + a`.
    """
    slices = sorted(slices, key=lambda item: item.z)
    nodes = np.array([item.z for item in slices])
    weights = np.array([item.weight for item in slices])
    n = config.n_legendre
    legendre, dlegendre = mapped_legendre(n, nodes, config.z_max)
    kappa, mass = config.kappa, config.mass_ratio
    full = config.z_kinetic == ZKinetic.FULL

    def stack(name, errors=False):
        source = (lambda item: item.errors[name]) if errors else (
            lambda item: getattr(item, name)
        )
        return np.stack([source(item) for item in slices])

    overlap, kinetic = stack("overlap"), stack("kinetic")
    potential, drift, zz = stack("potential"), stack("drift"), stack("z_kinetic")
    offsets = np.array([item.offset for item in slices])

    def product(left, right, blocks):
        return np.einsum("q,nq,mq,qab->namb", weights, left, right, blocks)

    local = kappa * kinetic + potential + offsets[:, None, None] * overlap
    if full:
        local = local + 2.0 * kappa * mass * zz
    hamiltonian = product(legendre, legendre, local) + 2.0 * kappa * mass * product(
        dlegendre, dlegendre, overlap
    )
    if full:
        hamiltonian += 2.0 * kappa * mass * (
            product(legendre, dlegendre, drift)
            + product(dlegendre, legendre, np.swapaxes(drift, 1, 2))
        )
    overlap_matrix = product(legendre, legendre, overlap)

    magnitude, dmagnitude = np.abs(legendre), np.abs(dlegendre)
    overlap_err, kinetic_err = stack("overlap", True), stack("kinetic", True)
    potential_err, drift_err = stack("potential", True), stack("drift", True)
    zz_err = stack("z_kinetic", True)
    local_err = (
        kappa * kinetic_err
        + potential_err
        + np.abs(offsets)[:, None, None] * overlap_err
    )
    if full:
        local_err = local_err + 2.0 * kappa * mass * zz_err
    hamiltonian_err = product(magnitude, magnitude, local_err) + (
        2.0 * kappa * mass * product(dmagnitude, dmagnitude, overlap_err)
    )
    if full:
        hamiltonian_err += 2.0 * kappa * mass * (
            product(magnitude, dmagnitude, drift_err)
            + product(dmagnitude, magnitude, np.swapaxes(drift_err, 1, 2))
        )
    overlap_err_matrix = product(magnitude, magnitude, overlap_err)

    dimension = n * overlap.shape[1]
    return MatrixPair(
        kind=MatrixKind.DYNAMIC,
        hamiltonian=_symmetrize(hamiltonian.reshape(dimension, dimension)),
        overlap=_symmetrize(overlap_matrix.reshape(dimension, dimension)),
        hamiltonian_errors=hamiltonian_err.reshape(dimension, dimension),
        overlap_errors=overlap_err_matrix.reshape(dimension, dimension),
        labels=[descriptor.label for descriptor in product_descriptors(n)],
        config_hash=config_hash(config),
        n_legendre=n,
        z_max=config.z_max,
        z_nodes=nodes,
        z_weights=weights,
        z_overlaps=overlap,
    )


def dynamic_matrix(
    config: CageConfig, sample: Optional[VolumeSample] = None
) -> MatrixPair:
    """
    Dynamic pair of dimension `8 * n_legendre`, assembled node by node.

    Example:
        ```python
        from prefect_octacage.assembly import dynamic_matrix
        from prefect_octacage.config import CageConfig

        pair = dynamic_matrix(CageConfig(r1=0.25, r2=0.35))
        assert pair.dimension == 64
        ```
    """
    sample = sample or volume_sample(config)
    nodes, weights = z_nodes(config)
    logger.info(
        "Assembling the %d-state dynamic problem on %d separation nodes",
        config.n_legendre * len(electron_descriptors()),
        len(nodes),
    )
    slices = [
        z_slice(z, weight, config, sample) for z, weight in zip(nodes, weights)
    ]
    return combine_slices(slices, config)
