"""Generalized symmetric eigenproblem `H c = lambda S c`"""

from typing import List, Optional

import numpy as np
from prefect.logging import get_logger
from pydantic import BaseModel, Field
from scipy import linalg

from prefect_octacage.assembly import MatrixPair
from prefect_octacage.exceptions import EigensolverError

logger = get_logger("octacage.eigensolver")


class OverlapDecomposition(BaseModel):
    """
    `S = V diag(gamma) V^T` with `gamma` descending and the retained directions.
    """

    vectors: np.ndarray = Field(default=..., description="Orthogonal matrix V.")
    eigenvalues: np.ndarray = Field(
        default=..., description="Overlap eigenvalues gamma, descending."
    )
    kept: List[int] = Field(
        default=..., description="Indices of gamma above the relative threshold."
    )

    class Config:
        arbitrary_types_allowed = True


class Spectrum(BaseModel):
    """
    Ascending eigenvalues and S-orthonormal eigenvectors in the raw basis.
    """

    eigenvalues: np.ndarray = Field(default=..., description="Ascending lambda_k.")
    coefficients: np.ndarray = Field(
        default=..., description="Column k holds c^(k) in the raw basis."
    )
    overlap_eigenvalues: np.ndarray = Field(
        default=..., description="All overlap eigenvalues gamma, descending."
    )
    retained: int = Field(default=..., description="Dimension after filtering.")
    threshold: float = Field(default=..., description="Relative overlap cutoff.")
    config_hash: str = Field(default="", description="Hash of the producing config.")
    labels: List[str] = Field(default_factory=list, description="Raw basis labels.")

    class Config:
        arbitrary_types_allowed = True

    @property
    def n_levels(self) -> int:
        """
        Number of eigenpairs.
        """
        return len(self.eigenvalues)


def _check_finite(name: str, matrix: np.ndarray):
    if not np.isfinite(matrix).all():
        rows, cols = np.nonzero(~np.isfinite(matrix))
        raise EigensolverError(
            f"{name} has non-finite entries at "
            f"{list(zip(rows.tolist(), cols.tolist()))}."
        )


def orthogonalize(overlap: np.ndarray, threshold: float) -> OverlapDecomposition:
    """
    Diagonalizes the overlap matrix and filters near-null directions.

    Args:
        overlap: Symmetric overlap matrix S.
        threshold: Directions with `gamma <= threshold * max(gamma)` are dropped.

    Returns:
        The decomposition with columns ordered by descending `gamma`.

    Raises:
        EigensolverError: If no direction survives or S is not finite.

    Example:
        ```python
        import numpy as np
        from prefect_octacage.eigensolver import orthogonalize

        decomposition = orthogonalize(np.array([[1.0, 0.5], [0.5, 1.0]]), 1e-6)
        decomposition.eigenvalues  # array([1.5, 0.5])
        ```
    """
    overlap = np.asarray(overlap, dtype=float)
    _check_finite("Overlap matrix", overlap)
    if not 0 <= threshold < 1:
        raise ValueError(f"Overlap threshold must lie in [0, 1), got {threshold!r}.")
    gamma, vectors = linalg.eigh(overlap)
    gamma, vectors = gamma[::-1], vectors[:, ::-1]
    largest = gamma[0]
    kept = np.flatnonzero(gamma > threshold * largest) if largest > 0 else []
    if len(kept) == 0:
        raise EigensolverError(
            "Every overlap direction falls below the filtering threshold."
        )
    dropped = len(gamma) - len(kept)
    if dropped:
        logger.warning(
            "Dropped %d of %d overlap directions below %.3g * max(gamma)",
            dropped,
            len(gamma),
            threshold,
        )
    return OverlapDecomposition(
        vectors=vectors, eigenvalues=gamma, kept=[int(index) for index in kept]
    )


def _fix_signs(coefficients: np.ndarray) -> np.ndarray:
    pivots = np.argmax(np.abs(coefficients), axis=0)
    signs = np.sign(coefficients[pivots, np.arange(coefficients.shape[1])])
    signs[signs == 0] = 1.0
    return coefficients * signs


def solve_generalized(
    hamiltonian: np.ndarray, overlap: np.ndarray, threshold: float = 1e-6
) -> Spectrum:
    """
    Solves `H c = lambda S c` for symmetric `H` and `S`.

    The orthonormal working basis is `X = V_kept gamma^(-1/2)`; diagonalizing
    `X^T H X = A diag(lambda) A^T` gives `c = X A`. The largest-magnitude coefficient
    of each eigenvector is positive.
    """
    hamiltonian = np.asarray(hamiltonian, dtype=float)
    _check_finite("Hamiltonian matrix", hamiltonian)
    decomposition = orthogonalize(overlap, threshold)
    kept = decomposition.kept
    transform = decomposition.vectors[:, kept] / np.sqrt(
        decomposition.eigenvalues[kept]
    )
    reduced = transform.T @ hamiltonian @ transform
    eigenvalues, rotation = linalg.eigh(0.5 * (reduced + reduced.T))
    return Spectrum(
        eigenvalues=eigenvalues,
        coefficients=_fix_signs(transform @ rotation),
        overlap_eigenvalues=decomposition.eigenvalues,
        retained=len(kept),
        threshold=threshold,
    )


def solve(pair: MatrixPair, threshold: Optional[float] = None) -> Spectrum:
    """
    Solves the eigenproblem of an assembled matrix pair.

    Args:
        pair: Hamiltonian and overlap in the raw basis.
        threshold: Relative overlap cutoff, `1e-6` when omitted.

    Returns:
        The spectrum, tagged with the pair's config hash and basis labels.
    """
    threshold = 1e-6 if threshold is None else threshold
    logger.debug("Solving a %d-dimensional %s problem", pair.dimension, pair.kind.value)
    spectrum = solve_generalized(pair.hamiltonian, pair.overlap, threshold)
    return spectrum.copy(
        update={"config_hash": pair.config_hash, "labels": list(pair.labels)}
    )


def multiplets(
    eigenvalues, rtol: float = 1e-8, atol: float = 0.0
) -> List[List[int]]:
    """
    Groups ascending eigenvalues into degenerate multiplets.

    Neighbours closer than `max(atol, rtol * max(1, |lambda|))` share a multiplet.
    Quadrature noise splits symmetry-degenerate levels, so `atol` should exceed the
    splitting it produces.

    Returns:
        Lists of zero-based level indices.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    groups: List[List[int]] = []
    for index, value in enumerate(eigenvalues):
        if groups:
            previous = eigenvalues[groups[-1][-1]]
            if abs(value - previous) <= max(atol, rtol * max(1.0, abs(previous))):
                groups[-1].append(index)
                continue
        groups.append([index])
    return groups
