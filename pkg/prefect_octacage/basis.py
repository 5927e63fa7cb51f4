"""
Electron orbitals of the cage and the Legendre factors of the separation coordinate.

The electron basis holds two s-orbitals centered at the positive charges and six
d-orbitals (m = 0, pointing towards the cage center) centered at the vertices. All
evaluation functions are vectorized: points carry their coordinates on the last axis.
"""

from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from prefect_octacage.exceptions import BasisError
from prefect_octacage.geometry import VERTEX_INDICES, charge_positions, vertex
from prefect_octacage.quadrature import IntegralResult, VolumeSample

CHARGE_INDICES = (1, 2)


class OrbitalKind(str, Enum):
    """
    Orbital families of the electron basis.
    """

    S = "s"
    D = "d"


class AngularForm(str, Enum):
    """
    Angular factor of the d-orbitals: `3 cos^2 - 1` or the linear `3 cos - 1`.
    """

    SQUARED = "squared"
    LINEAR = "linear"


class RadialModel(str, Enum):
    """
    Radial shapes available for the d-orbitals.
    """

    HYDROGEN_3D = "hydrogen3d"
    RHO2_EXP = "rho2exp"
    CUSTOM_TABLE = "custom-table"


class BasisDescriptor(BaseModel):
    """
    Identity of one basis function.
    """

    kind: OrbitalKind = Field(default=..., description="Orbital family, s or d.")
    center: int = Field(
        default=...,
        description="Charge index j for s-orbitals, vertex index k for d-orbitals.",
    )
    legendre_index: Optional[int] = Field(
        default=None,
        description="Legendre index n of the separation factor (dynamic basis only).",
    )

    class Config:
        allow_mutation = False

    @root_validator
    def check_center(cls, values):
        """
        Checks the center index against the orbital family.
        """
        kind, center = values.get("kind"), values.get("center")
        allowed = CHARGE_INDICES if kind == OrbitalKind.S else VERTEX_INDICES
        if kind is not None and center not in allowed:
            raise ValueError(f"{kind.value}-orbital center must be one of {allowed}.")
        return values

    @validator("legendre_index")
    def check_legendre_index(cls, value):
        """
        Legendre indices start at zero.
        """
        if value is not None and value < 0:
            raise ValueError("Legendre index must be non-negative.")
        return value

    @property
    def label(self) -> str:
        """
        Short label such as `s1`, `d-3` or `d+2:P4`.
        """
        center = str(self.center) if self.kind == OrbitalKind.S else f"{self.center:+d}"
        label = f"{self.kind.value}{center}"
        if self.legendre_index is not None:
            label += f":P{self.legendre_index}"
        return label


def electron_descriptors(include_d: bool = True) -> List[BasisDescriptor]:
    """
    The electron basis in its fixed order: s1, s2, then d-3 ... d+3.
    """
    descriptors = [
        BasisDescriptor(kind=OrbitalKind.S, center=j) for j in CHARGE_INDICES
    ]
    if include_d:
        descriptors += [
            BasisDescriptor(kind=OrbitalKind.D, center=k) for k in VERTEX_INDICES
        ]
    return descriptors


def product_descriptors(
    n_legendre: int, include_d: bool = True
) -> List[BasisDescriptor]:
    """
    The dynamic basis `chi_alpha(x; z) P_n(z)`, Legendre-major:
    index = n * n_orb + alpha.
    """
    return [
        descriptor.copy(update={"legendre_index": n})
        for n in range(n_legendre)
        for descriptor in electron_descriptors(include_d)
    ]


@lru_cache(maxsize=8)
def load_radial_table(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reads a two-column `(rho, g)` radial table.

    Args:
        path: Location of a whitespace separated text file.

    Returns:
        The ascending `rho` column and the matching `g` column.
    """
    table = np.loadtxt(path, ndmin=2)
    if table.shape[0] < 2 or table.shape[1] < 2:
        raise ValueError(f"Radial table {path} needs at least two rows of (rho, g).")
    rho, g = table[:, 0], table[:, 1]
    if np.any(np.diff(rho) <= 0):
        raise ValueError(f"Radial table {path} must have strictly ascending rho.")
    return rho, g


class RadialFunction:
    """
    Radial factor `g_nd(rho)` of the d-orbitals and its derivative.

    Args:
        model: The radial shape.
        table: Path of the `(rho, g)` table, for `custom-table` only.
    """

    def __init__(self, model: RadialModel, table: Optional[Path] = None):
        self.model = RadialModel(model)
        self.table = None
        if self.model == RadialModel.CUSTOM_TABLE:
            if table is None:
                raise ValueError("radial_model custom-table requires radial_table.")
            self.table = load_radial_table(str(table))

    def __call__(self, rho: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluates `g(rho)` and `g'(rho)`.
        """
        rho = np.asarray(rho, dtype=float)
        if self.model == RadialModel.HYDROGEN_3D:
            decay = np.exp(-rho / 3.0)
            return rho**2 * decay, (2.0 * rho - rho**2 / 3.0) * decay
        if self.model == RadialModel.RHO2_EXP:
            decay = np.exp(-rho)
            return rho**2 * decay, (2.0 * rho - rho**2) * decay

        rho_table, g_table = self.table
        g = np.interp(rho, rho_table, g_table, right=0.0)
        slopes = np.diff(g_table) / np.diff(rho_table)
        segment = np.searchsorted(rho_table, rho, side="right") - 1
        inside = (segment >= 0) & (segment < len(slopes))
        dg = np.where(inside, slopes[np.clip(segment, 0, len(slopes) - 1)], 0.0)
        return g, dg


class OrbitalParameters(BaseModel):
    """
    Shape parameters shared by all orbitals.
    """

    r1: float = Field(
        default=..., description="Effective radius of the s-orbitals (units of a)."
    )
    r2: float = Field(
        default=..., description="Effective radius of the d-orbitals (units of a)."
    )
    angular_form: AngularForm = Field(
        default=AngularForm.SQUARED, description="Angular factor of the d-orbitals."
    )
    radial_model: RadialModel = Field(
        default=RadialModel.HYDROGEN_3D, description="Radial shape of the d-orbitals."
    )
    radial_table: Optional[Path] = Field(
        default=None, description="Two-column (rho, g) table for custom-table."
    )

    @validator("r1", "r2")
    def check_radius(cls, value):
        """
        Radii must be positive.
        """
        if not value > 0:
            raise ValueError("Orbital radii must be positive.")
        return value

    def radial(self) -> RadialFunction:
        """
        The configured radial factor.
        """
        return RadialFunction(self.radial_model, self.radial_table)


def _d_parts(k: int, x: np.ndarray, params: OrbitalParameters):
    """
    Shared pieces of a d-orbital and its gradient, unnormalized.
    """
    x = np.asarray(x, dtype=float)
    center = vertex(k)
    axis = -center  # unit vector from the vertex towards the cage center
    offset = x - center
    distance = np.linalg.norm(offset, axis=-1)
    regular = distance > 0
    safe = np.where(regular, distance, 1.0)
    cosine = np.where(regular, np.einsum("...i,i->...", offset, axis) / safe, 1.0)
    g, dg = params.radial()(distance / params.r2)
    if params.angular_form == AngularForm.SQUARED:
        angular, dangular = 3.0 * cosine**2 - 1.0, 6.0 * cosine
    else:
        angular, dangular = 3.0 * cosine - 1.0, np.full_like(cosine, 3.0)
    scale = params.r2**-1.5
    return offset, safe, regular, axis, cosine, angular, dangular, g, dg, scale


def eval_d(
    k: int, x: np.ndarray, params: OrbitalParameters, normalization: float
) -> np.ndarray:
    """
    Evaluates the d-orbital centered at vertex `k`.

    Args:
        k: Vertex index.
        x: Points, shape `(..., 3)`.
        params: Orbital parameters.
        normalization: The constant `N1`.

    Returns:
        `N1 r2^(-3/2) [3 cos^2(theta) - 1] g(|x - p_k| / r2)`, zero at the vertex.
    """
    _, _, regular, _, _, angular, _, g, _, scale = _d_parts(k, x, params)
    return np.where(regular, normalization * scale * angular * g, 0.0)


def grad_d(
    k: int, x: np.ndarray, params: OrbitalParameters, normalization: float
) -> np.ndarray:
    """
    Analytic gradient of `eval_d` with respect to `x`, shape `(..., 3)`.
    """
    offset, safe, regular, axis, cosine, angular, dangular, g, dg, scale = _d_parts(
        k, x, params
    )
    radial_unit = offset / safe[..., None]
    dcosine = (axis - cosine[..., None] * radial_unit) / safe[..., None]
    gradient = (dangular * g)[..., None] * dcosine + (angular * dg / params.r2)[
        ..., None
    ] * radial_unit
    return np.where(regular[..., None], normalization * scale * gradient, 0.0)


def _s_parts(j: int, x: np.ndarray, z: float):
    if j not in CHARGE_INDICES:
        raise ValueError(f"Charge index must be one of {CHARGE_INDICES}, got {j!r}.")
    x = np.asarray(x, dtype=float)
    offset = x - charge_positions(z)[j - 1]
    distance = np.linalg.norm(offset, axis=-1)
    return offset, distance


def eval_s(
    j: int, x: np.ndarray, z: float, params: OrbitalParameters, normalization: float
) -> np.ndarray:
    """
    Evaluates the s-orbital `N0 exp(-|x - y_j(z)| / r1)` centered at charge `j`.
    """
    _, distance = _s_parts(j, x, z)
    return normalization * np.exp(-distance / params.r1)


def grad_s(
    j: int, x: np.ndarray, z: float, params: OrbitalParameters, normalization: float
) -> np.ndarray:
    """
    Analytic gradient of `eval_s` with respect to `x`; zero at the charge itself.
    """
    offset, distance = _s_parts(j, x, z)
    regular = distance > 0
    safe = np.where(regular, distance, 1.0)
    value = normalization * np.exp(-distance / params.r1)
    gradient = -(value / (params.r1 * safe))[..., None] * offset
    return np.where(regular[..., None], gradient, 0.0)


def eval_s_dz(
    j: int,
    x: np.ndarray,
    z: float,
    params: OrbitalParameters,
    normalization: float,
    log_derivative: float = 0.0,
) -> np.ndarray:
    """
    Derivative of `eval_s` with respect to the separation `z` at fixed `x`.

    The charge moves as `y_j = (0, 0, ±z/2)`. At `x = y_j` the geometric term is
    replaced by its angular average, zero.

    Args:
        j: Charge index.
        x: Points, shape `(..., 3)`.
        z: Separation.
        params: Orbital parameters.
        normalization: The constant `N0(z)`.
        log_derivative: `d ln N0 / dz`; zero when the normalization is held fixed.

    Returns:
        `dchi_j / dz` at every point.
    """
    offset, distance = _s_parts(j, x, z)
    sign = 1.0 if j == 1 else -1.0
    regular = distance > 0
    safe = np.where(regular, distance, 1.0)
    value = normalization * np.exp(-distance / params.r1)
    geometric = np.where(
        regular, sign * offset[..., 2] / (2.0 * params.r1 * safe), 0.0
    )
    return value * (log_derivative + geometric)


def legendre_table(n_max: int, t) -> Tuple[np.ndarray, np.ndarray]:
    """
    Legendre polynomials `P_0 ... P_{n_max - 1}` and their derivatives at `t`.

    Uses `(n+1) P_{n+1} = (2n+1) t P_n - n P_{n-1}` and
    `P'_{n+1} = P'_{n-1} + (2n+1) P_n`.

    Returns:
        Two arrays of shape `(n_max, *t.shape)`.
    """
    if n_max < 1:
        raise ValueError("At least one Legendre polynomial is required.")
    t = np.asarray(t, dtype=float)
    values = np.empty((n_max,) + t.shape)
    derivatives = np.empty_like(values)
    values[0], derivatives[0] = 1.0, 0.0
    if n_max > 1:
        values[1], derivatives[1] = t, 1.0
    for n in range(1, n_max - 1):
        values[n + 1] = ((2 * n + 1) * t * values[n] - n * values[n - 1]) / (n + 1)
        derivatives[n + 1] = derivatives[n - 1] + (2 * n + 1) * values[n]
    return values, derivatives


def legendre(n: int, t):
    """
    Standard Legendre polynomial `P_n(t)`.
    """
    if n < 0:
        raise ValueError("Legendre index must be non-negative.")
    value = legendre_table(n + 1, t)[0][n]
    return float(value) if np.ndim(value) == 0 else value


def mapped_legendre(n_max: int, z, z_max: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Legendre polynomials mapped from `[-1, 1]` onto `[0, z_max]` and their
    `z`-derivatives.
    """
    values, derivatives = legendre_table(n_max, 2.0 * np.asarray(z) / z_max - 1.0)
    return values, derivatives * (2.0 / z_max)


def normalize(function, sample: VolumeSample) -> IntegralResult:
    """
    Normalization constants over the octahedron.

    Args:
        function: Vectorized function of the points; may return several functions
            stacked on the leading axis.
        sample: Volume nodes.

    Returns:
        Constants `c` with `integral (c f)^2 = 1` and their propagated errors.

    Raises:
        BasisError: If a function vanishes on every node.
    """
    norm = sample.integrate(lambda points: np.asarray(function(points)) ** 2)
    squared = np.asarray(norm.value, dtype=float)
    if np.any(squared <= 0):
        raise BasisError("Cannot normalize a function that vanishes in the cage.")
    constant = 1.0 / np.sqrt(squared)
    error = 0.5 * constant * np.asarray(norm.error_estimate) / squared
    if constant.ndim == 0:
        return IntegralResult(value=float(constant), error_estimate=float(error))
    return IntegralResult(value=constant, error_estimate=error)


class OrbitalSet:
    """
    The electron orbitals at one charge separation.

    Normalization constants are fixed once by `normalize` (or taken over with
    `with_normalizations`) and are immutable afterwards.

    Args:
        params: Orbital parameters.
        separation: Charge separation `z`.
        include_d: Whether the six vertex d-orbitals are part of the set.
    """

    def __init__(
        self, params: OrbitalParameters, separation: float, include_d: bool = True
    ):
        self.params = params
        self.separation = separation
        self.include_d = include_d
        self.descriptors = electron_descriptors(include_d)
        self.normalizations: Optional[np.ndarray] = None
        self.log_derivatives: Optional[np.ndarray] = None

    @property
    def n_orbitals(self) -> int:
        """
        Number of orbitals in the set.
        """
        return len(self.descriptors)

    def _raw_values(self, points: np.ndarray) -> np.ndarray:
        return np.stack(
            [
                eval_s(d.center, points, self.separation, self.params, 1.0)
                if d.kind == OrbitalKind.S
                else eval_d(d.center, points, self.params, 1.0)
                for d in self.descriptors
            ]
        )

    def _raw_gradients(self, points: np.ndarray) -> np.ndarray:
        return np.stack(
            [
                grad_s(d.center, points, self.separation, self.params, 1.0)
                if d.kind == OrbitalKind.S
                else grad_d(d.center, points, self.params, 1.0)
                for d in self.descriptors
            ]
        )

    def _raw_z_derivatives(self, points: np.ndarray) -> np.ndarray:
        return np.stack(
            [
                eval_s_dz(d.center, points, self.separation, self.params, 1.0)
                if d.kind == OrbitalKind.S
                else np.zeros(len(points))
                for d in self.descriptors
            ]
        )

    def normalize(self, sample: VolumeSample) -> "OrbitalSet":
        """
        Fixes `N0`, `N1` and `d ln N0 / dz` on the nodes of `sample`.
        """

        def moments(points):
            raw = self._raw_values(points)
            return np.stack([raw * raw, 2.0 * raw * self._raw_z_derivatives(points)])

        result = sample.integrate(moments)
        squared, slope = result.value
        if np.any(squared <= 0):
            raise BasisError(
                f"Orbital normalization vanishes at separation {self.separation}."
            )
        self.normalizations = 1.0 / np.sqrt(squared)
        self.log_derivatives = -0.5 * slope / squared
        return self

    def with_normalizations(
        self, normalizations: np.ndarray, log_derivatives: Optional[np.ndarray] = None
    ) -> "OrbitalSet":
        """
        Takes over normalization constants computed elsewhere.
        """
        self.normalizations = np.asarray(normalizations, dtype=float)
        self.log_derivatives = (
            np.zeros(self.n_orbitals)
            if log_derivatives is None
            else np.asarray(log_derivatives, dtype=float)
        )
        return self

    def _require_normalized(self):
        if self.normalizations is None:
            raise BasisError(
                "Orbitals evaluated before their normalization constants were fixed."
            )

    def values(self, points: np.ndarray) -> np.ndarray:
        """
        Normalized orbital values, shape `(n_orbitals, n_points)`.
        """
        self._require_normalized()
        return self.normalizations[:, None] * self._raw_values(points)

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """
        Normalized orbital gradients, shape `(n_orbitals, n_points, 3)`.
        """
        self._require_normalized()
        return self.normalizations[:, None, None] * self._raw_gradients(points)

    def z_derivatives(self, points: np.ndarray) -> np.ndarray:
        """
        Separation derivatives of the normalized orbitals, shape
        `(n_orbitals, n_points)`; the d-orbitals do not depend on `z`.
        """
        self._require_normalized()
        raw = self._raw_values(points)
        return self.normalizations[:, None] * (
            self._raw_z_derivatives(points) + self.log_derivatives[:, None] * raw
        )
