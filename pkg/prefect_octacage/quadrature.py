"""
Quadrature over the octahedron volume and over the separation interval.

Volume nodes are produced in fixed blocks of `BLOCK_SIZE` nodes. Monte Carlo blocks
come from a counter-based Philox generator keyed by `(seed, stream, block)`, so node `i`
is a pure function of the seed, the stream and `i`. Every reduction sums each block
separately and combines the block partials with `math.fsum`; the result is correctly
rounded and therefore identical whatever order, or worker, produced the partials.
"""

import math
from enum import Enum
from typing import Any, Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from prefect.logging import get_logger
from pydantic import BaseModel, Extra, Field, validator

from prefect_octacage.exceptions import QuadratureError

BLOCK_SIZE = 8192

logger = get_logger("octacage.quadrature")


class QuadratureMethod(str, Enum):
    """
    Volume integration schemes.
    """

    MONTE_CARLO = "monte_carlo"
    PRODUCT_GAUSS = "product_gauss"


class QuadratureSpec(BaseModel):
    """
    Numerical integration settings shared by every matrix element.
    """

    method: QuadratureMethod = Field(
        default=QuadratureMethod.MONTE_CARLO,
        description="Volume integration scheme: monte_carlo or product_gauss.",
    )
    points: int = Field(
        default=200_000,
        description=(
            "Monte Carlo sample count, or the per-axis Gauss order for product_gauss."
        ),
    )
    seed: int = Field(
        default=1998, description="Seed of the counter-based node generator."
    )
    delta: float = Field(
        default=1e-3,
        description="Coulomb softening length in units of the half diagonal.",
    )
    z_points: int = Field(
        default=16, description="Gauss-Legendre order of the separation integral."
    )

    class Config:
        extra = Extra.forbid

    @validator("points")
    def check_points(cls, value):
        """
        Requires at least one node.
        """
        if value < 1:
            raise ValueError("quadrature.points must be at least 1.")
        return value

    @validator("seed")
    def check_seed(cls, value):
        """
        Keeps the seed within 64 unsigned bits.
        """
        if not 0 <= value < 2**64:
            raise ValueError("quadrature.seed must be a non-negative 64-bit integer.")
        return value

    @validator("delta")
    def check_delta(cls, value):
        """
        Rejects negative softening.
        """
        if value < 0:
            raise ValueError("quadrature.delta must be non-negative.")
        return value

    @validator("z_points")
    def check_z_points(cls, value):
        """
        Requires at least two separation nodes so per-z data can be interpolated.
        """
        if value < 2:
            raise ValueError("quadrature.z_points must be at least 2.")
        return value


class IntegralResult(BaseModel):
    """
    An integral estimate with its error estimate; both may be arrays of equal shape.
    """

    value: Any = Field(default=..., description="Integral estimate.")
    error_estimate: Any = Field(
        default=..., description="Non-negative error estimate of the value."
    )

    class Config:
        arbitrary_types_allowed = True


def coulomb(r, delta: float):
    """
    Softened Coulomb kernel `1 / sqrt(r^2 + delta^2)`.

    Args:
        r: Distance or array of distances.
        delta: Softening length; `0` gives the bare kernel.

    Returns:
        A float for scalar input, an array otherwise.
    """
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        kernel = 1.0 / np.sqrt(r * r + delta * delta)
    if kernel.ndim == 0:
        return float(kernel)
    return kernel


def octahedron_volume(a: float = 1.0) -> float:
    """Volume of the octahedron with half diagonal `a`."""
    return 4.0 * a**3 / 3.0


def block_fsum(partials):
    """
    Correctly rounded sum over the first axis of stacked block partials.
    """
    partials = np.asarray(partials, dtype=float)
    if partials.ndim == 1:
        return math.fsum(partials)
    columns = partials.reshape(partials.shape[0], -1).T
    return np.array([math.fsum(column) for column in columns]).reshape(
        partials.shape[1:]
    )


class VolumeSample:
    """
    Nodes and weights of a volume rule over the octahedron.

    Args:
        points: Node coordinates, shape `(n, 3)`.
        weights: Quadrature weights, shape `(n,)`.
        method: The scheme that produced the nodes.
        volume: Volume of the integration domain.
        error_weights: Weights of the embedded error rule (product Gauss only).
    """

    def __init__(
        self,
        points: np.ndarray,
        weights: np.ndarray,
        method: QuadratureMethod,
        volume: float,
        error_weights: Optional[np.ndarray] = None,
    ):
        self.points = points
        self.weights = weights
        self.method = method
        self.volume = volume
        self.error_weights = error_weights

    @property
    def n_nodes(self) -> int:
        """
        Number of nodes carrying a non-zero weight.
        """
        return int(np.count_nonzero(self.weights))

    def integrate(self, integrand: Callable[[np.ndarray], Any]) -> IntegralResult:
        """
        Integrates a vectorized integrand over the sample.

        Args:
            integrand: Maps an `(b, 3)` block of nodes to an array of shape `(..., b)`;
                every leading index is an independent integral.

        Returns:
            An `IntegralResult` whose value and error have the leading shape
            of the integrand.

        Raises:
            QuadratureError: If the integrand is not finite at some node.
        """
        sums, squares, errors = [], [], []
        for start in range(0, len(self.weights), BLOCK_SIZE):
            stop = start + BLOCK_SIZE
            values = np.asarray(integrand(self.points[start:stop]), dtype=float)
            finite = np.isfinite(values)
            if not finite.all():
                elements = np.argwhere(~finite.all(axis=-1)).tolist()
                raise QuadratureError(
                    f"Integrand is not finite at {int((~finite).sum())} node(s) "
                    f"for element(s) {elements or [[]]}; enable Coulomb softening "
                    "(quadrature.delta > 0) for singular integrands."
                )
            weights = self.weights[start:stop]
            sums.append(np.einsum("...p,p->...", values, weights))
            if self.error_weights is None:
                squares.append(np.einsum("...p,p->...", values * values, weights))
            else:
                errors.append(
                    np.einsum("...p,p->...", values, self.error_weights[start:stop])
                )

        value = block_fsum(np.stack(sums))
        if self.error_weights is None:
            second = block_fsum(np.stack(squares))
            n = max(self.n_nodes - 1, 1)
            error = np.sqrt(np.maximum(self.volume * second - value * value, 0.0) / n)
        else:
            error = np.abs(block_fsum(np.stack(errors)))
        if np.ndim(value) == 0:
            value, error = float(value), float(error)
        return IntegralResult(value=value, error_estimate=error)


def _monte_carlo_block(seed: int, stream: int, block: int, a: float) -> np.ndarray:
    """
    Draws one full block of nodes uniformly in the octahedron.

    The simplex `x >= 0, sum(x) <= 1` is sampled exactly from normalized exponential
    spacings, then each coordinate receives an independent random sign.
    """
    generator = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream, block)))
    )
    spacings = generator.standard_exponential((BLOCK_SIZE, 4))
    simplex = spacings[:, :3] / spacings.sum(axis=1, keepdims=True)
    signs = 2.0 * generator.integers(0, 2, size=(BLOCK_SIZE, 3)) - 1.0
    return a * simplex * signs


def _gauss_unit(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _product_gauss_rule(order: int, a: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Collapsed product Gauss rule on the octahedron: the unit cube is mapped onto the
    corner tetrahedron of each of the eight orthants.
    """
    t, w = _gauss_unit(order)
    u, v, s = np.meshgrid(t, t, t, indexing="ij")
    wu, wv, ws = np.meshgrid(w, w, w, indexing="ij")
    corner = np.stack(
        [u, (1 - u) * v, (1 - u) * (1 - v) * s], axis=-1
    ).reshape(-1, 3)
    jacobian = ((1 - u) ** 2 * (1 - v) * wu * wv * ws).reshape(-1)

    signs = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
        dtype=float,
    )
    points = (signs[:, None, :] * corner[None, :, :]).reshape(-1, 3)
    weights = np.tile(jacobian, len(signs))
    return a * points, a**3 * weights


def sample_volume(
    spec: QuadratureSpec, a: float = 1.0, stream: int = 0
) -> VolumeSample:
    """
    Builds the volume nodes described by `spec`.

    Args:
        spec: Quadrature settings.
        a: Half diagonal of the octahedron.
        stream: Independent node stream; distinct streams give independent samples.

    Returns:
        A `VolumeSample` over the octahedron.

    Example:
        ```python
        from prefect_octacage.quadrature import QuadratureSpec, sample_volume

        sample = sample_volume(QuadratureSpec(points=10_000, seed=3))
        volume = sample.integrate(lambda points: points[:, 0] * 0 + 1).value
        ```
    """
    volume = octahedron_volume(a)
    if spec.method == QuadratureMethod.MONTE_CARLO:
        n_blocks = -(-spec.points // BLOCK_SIZE)
        points = np.concatenate(
            [
                _monte_carlo_block(spec.seed, stream, block, a)
                for block in range(n_blocks)
            ]
        )[: spec.points]
        weights = np.full(spec.points, volume / spec.points)
        logger.debug(
            "Drew %d Monte Carlo nodes (seed %d, stream %d)",
            spec.points,
            spec.seed,
            stream,
        )
        return VolumeSample(points, weights, spec.method, volume)

    fine_points, fine_weights = _product_gauss_rule(spec.points, a)
    coarse_points, coarse_weights = _product_gauss_rule(max(1, -(-spec.points // 2)), a)
    points = np.concatenate([fine_points, coarse_points])
    weights = np.concatenate([fine_weights, np.zeros_like(coarse_weights)])
    error_weights = np.concatenate([fine_weights, -coarse_weights])
    return VolumeSample(points, weights, spec.method, volume, error_weights)


def integrate_volume(
    f: Callable[[np.ndarray], Any],
    spec: QuadratureSpec,
    a: float = 1.0,
    stream: int = 0,
) -> IntegralResult:
    """
    Estimates the integral of `f` over the octahedron.

    Args:
        f: Vectorized integrand mapping `(b, 3)` points to `(..., b)` values.
        spec: Quadrature settings.
        a: Half diagonal of the octahedron.
        stream: Node stream.

    Returns:
        The estimate with a standard error (Monte Carlo) or the difference to the
        half-order rule (product Gauss).
    """
    return sample_volume(spec, a, stream).integrate(f)


def gauss_legendre_rule(
    z_range: Tuple[float, float], order: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes and weights mapped onto `z_range`.

    Args:
        z_range: Interval `(lower, upper)`.
        order: Number of nodes.

    Returns:
        Ascending nodes and their weights.
    """
    lower, upper = z_range
    if not upper > lower:
        raise ValueError(f"Integration range {z_range!r} is empty.")
    if order < 1:
        raise ValueError("Gauss-Legendre order must be at least 1.")
    nodes, weights = leggauss(order)
    half_width = 0.5 * (upper - lower)
    return lower + half_width * (nodes + 1.0), half_width * weights


def integrate_z(
    f: Callable[[np.ndarray], Any],
    z_range: Tuple[float, float],
    spec: QuadratureSpec,
) -> IntegralResult:
    """
    Gauss-Legendre estimate of a one dimensional integral over `z_range`.

    Args:
        f: Vectorized integrand of the separation.
        z_range: Interval `(lower, upper)`.
        spec: Quadrature settings; `spec.z_points` is the order.

    Returns:
        The estimate; the error is the difference to the half-order rule.
    """

    def _rule(order):
        nodes, weights = gauss_legendre_rule(z_range, order)
        return math.fsum(weights * np.asarray(f(nodes), dtype=float))

    value = _rule(spec.z_points)
    coarse = _rule(max(1, spec.z_points // 2))
    if not math.isfinite(value):
        raise QuadratureError(f"Integrand is not finite on {z_range!r}.")
    return IntegralResult(value=value, error_estimate=abs(value - coarse))
