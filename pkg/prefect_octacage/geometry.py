"""Octahedral cage geometry, charge placement and unit conversions"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field, validator

# e^2 / (4 pi eps0) in eV * Angstrom
COULOMB_EV_ANGSTROM = 14.3996
BOHR_RADIUS_ANGSTROM = 0.529177210903
# hbar^2 / (2 m_e) * (4 pi eps0 / e^2) in Angstrom, i.e. half the Bohr radius
KINETIC_PREFACTOR_ANGSTROM = BOHR_RADIUS_ANGSTROM / 2
DEUTERON_ELECTRON_MASS_RATIO = 3670.48296788

VERTEX_INDICES = (-3, -2, -1, 1, 2, 3)


def _check_positive(name: str, value: float):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}.")


def vertex(k: int, a: float = 1.0) -> np.ndarray:
    """
    Returns the vertex `k` of the octahedron, i.e. `sign(k) * a * e_|k|`.

    Args:
        k: Vertex index in {-3, -2, -1, 1, 2, 3}.
        a: Half diagonal of the octahedron.

    Returns:
        A point as an array of shape `(3,)`.
    """
    if k not in VERTEX_INDICES:
        raise ValueError(f"Vertex index must be one of {VERTEX_INDICES}, got {k!r}.")
    _check_positive("Half diagonal", a)
    point = np.zeros(3)
    point[abs(k) - 1] = np.sign(k) * a
    return point


def vertices(a: float = 1.0) -> np.ndarray:
    """
    Returns the six vertices `±a e_i` in the index order k = -3, -2, -1, +1, +2, +3.

    Args:
        a: Half diagonal of the octahedron.

    Returns:
        An array of shape `(6, 3)`.

    Example:
        ```python
        from prefect_octacage.geometry import vertices

        points = vertices(2.05)
        assert points.shape == (6, 3)
        ```
    """
    _check_positive("Half diagonal", a)
    return np.stack([vertex(k, a) for k in VERTEX_INDICES])


def contains(x, a: float = 1.0):
    """
    Tests membership in the closed octahedron `|x1| + |x2| + |x3| <= a`.

    Args:
        x: A point, or an array of points with the coordinates on the last axis.
        a: Half diagonal of the octahedron.

    Returns:
        A boolean for a single point, a boolean array otherwise.
    """
    inside = np.abs(np.asarray(x, dtype=float)).sum(axis=-1) <= a
    if np.ndim(inside) == 0:
        return bool(inside)
    return inside


def charge_positions(z: float) -> np.ndarray:
    """
    Places the two positive charges symmetrically on the third axis.

    Args:
        z: Separation of the charges in units of the half diagonal.

    Returns:
        An array of shape `(2, 3)` holding `y1 = (0, 0, z/2)` and `y2 = (0, 0, -z/2)`.
    """
    return np.array([[0.0, 0.0, 0.5 * z], [0.0, 0.0, -0.5 * z]])


def energy_unit_ev(a_angstrom: float) -> float:
    """
    Energy of one dimensionless Hamiltonian unit, `e^2 / (4 pi eps0 a)`, in eV.

    Args:
        a_angstrom: Half diagonal of the cage in Angstrom.

    Returns:
        eV per dimensionless unit.
    """
    _check_positive("a_angstrom", a_angstrom)
    return COULOMB_EV_ANGSTROM / a_angstrom


def kinetic_prefactor(a_angstrom: float) -> float:
    """
    Dimensionless prefactor of the electron Laplacian, `hbar^2 / (2 m_e a)` in units of
    `e^2 / (4 pi eps0)`.

    Args:
        a_angstrom: Half diagonal of the cage in Angstrom.

    Returns:
        The prefactor, about `0.2646 / a_angstrom`.
    """
    _check_positive("a_angstrom", a_angstrom)
    return KINETIC_PREFACTOR_ANGSTROM / a_angstrom


def units_to_ev(units: float, a_angstrom: float) -> float:
    """Converts an energy in dimensionless units to eV."""
    return units * energy_unit_ev(a_angstrom)


class Octahedron(BaseModel):
    """
    Regular octahedral cage with six fixed vertex atoms.
    """

    half_diagonal: float = Field(
        default=1.0, description="Half diagonal of the cage in internal units."
    )
    a_angstrom: float = Field(
        default=2.05, description="Physical half diagonal in Angstrom."
    )

    @validator("half_diagonal", "a_angstrom")
    def check_positive(cls, value):
        """
        Rejects non-positive lengths.
        """
        _check_positive("Length", value)
        return value

    @property
    def vertices(self) -> np.ndarray:
        """
        The six vertices in deterministic index order.
        """
        return vertices(self.half_diagonal)

    @property
    def volume(self) -> float:
        """
        Volume `4 a^3 / 3` of the cage.
        """
        return 4.0 * self.half_diagonal**3 / 3.0

    @property
    def energy_unit_ev(self) -> float:
        """
        eV per dimensionless energy unit for this cage size.
        """
        return energy_unit_ev(self.a_angstrom)

    def contains(self, x):
        """
        Tests membership of `x` in the closed cage.
        """
        return contains(x, self.half_diagonal)


class ChargePair(BaseModel):
    """
    Two positive charges placed symmetrically on the diagonal of the cage.
    """

    separation: float = Field(
        default=..., description="Charge separation z in units of the half diagonal."
    )

    @validator("separation")
    def check_separation(cls, value):
        """
        Keeps both charges strictly inside the cage.
        """
        if not 0 <= value < 2:
            raise ValueError(f"Separation must lie in [0, 2), got {value!r}.")
        return value

    @property
    def half_separation(self) -> float:
        """
        The static parameter `l = z / 2`.
        """
        return 0.5 * self.separation

    @property
    def positions(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        The charge positions `(y1, y2)` with `y1 = -y2`.
        """
        y1, y2 = charge_positions(self.separation)
        return y1, y2
