"""Run configuration: the flat `key = value` file, environment overrides and hashing"""

import hashlib
import os
import re
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from prefect.logging import get_logger
from pydantic import BaseModel, Extra, Field, ValidationError, root_validator, validator

from prefect_octacage.basis import AngularForm, OrbitalParameters, RadialModel
from prefect_octacage.exceptions import ConfigurationError
from prefect_octacage.geometry import Octahedron, kinetic_prefactor
from prefect_octacage.quadrature import QuadratureSpec

ENV_PREFIX = "OCTACAGE_"
COMMENT = re.compile(r"(^|\s)#")

logger = get_logger("octacage.config")


class ZKinetic(str, Enum):
    """
    How the kinetic operator of the charges acts on the product basis.
    """

    FULL = "full"
    POLYNOMIAL_ONLY = "polynomial_only"


class SweepSpec(BaseModel):
    """
    Grid of half-separations `l` for the static sweeps.
    """

    l_min: float = Field(default=0.1, description="Smallest half-separation.")
    l_max: float = Field(default=0.95, description="Largest half-separation.")
    l_points: int = Field(default=24, description="Number of grid points.")
    reference_l: float = Field(
        default=0.5, description="Half-separation used by the convergence study."
    )

    class Config:
        extra = Extra.forbid

    @validator("l_points")
    def check_l_points(cls, value):
        """
        A sweep needs at least one point.
        """
        if value < 1:
            raise ValueError("sweep.l_points must be at least 1.")
        return value

    @root_validator(skip_on_failure=True)
    def check_range(cls, values):
        """
        Keeps the grid ordered and strictly positive.
        """
        if not 0 < values["l_min"] <= values["l_max"]:
            raise ValueError("sweep requires 0 < l_min <= l_max.")
        return values


class DensitySpec(BaseModel):
    """
    Output grid of the projected densities and grouping of degenerate levels.
    """

    grid_points: int = Field(
        default=96, description="Number of z values on [0, z_max]."
    )
    degeneracy_tolerance: float = Field(
        default=1e-2,
        description="Largest level spacing treated as a degenerate multiplet.",
    )

    class Config:
        extra = Extra.forbid

    @validator("grid_points")
    def check_grid_points(cls, value):
        """
        Requires both end points of the interval.
        """
        if value < 2:
            raise ValueError("density.grid_points must be at least 2.")
        return value

    @validator("degeneracy_tolerance")
    def check_degeneracy_tolerance(cls, value):
        """
        Rejects negative tolerances; zero groups only coinciding levels.
        """
        if value < 0:
            raise ValueError("density.degeneracy_tolerance must not be negative.")
        return value


class RunSpec(BaseModel):
    """
    Execution settings that do not change any result.
    """

    workers: int = Field(
        default=1, description="Maximum number of tasks submitted at once."
    )

    class Config:
        extra = Extra.forbid

    @validator("workers")
    def check_workers(cls, value):
        """
        At least one worker.
        """
        if value < 1:
            raise ValueError("run.workers must be at least 1.")
        return value


SECTIONS = ("quadrature", "sweep", "density", "run")


class CageConfig(BaseModel):
    """
    All physical and numerical parameters of one calculation.

    Lengths are in units of the cage half diagonal `a` unless the name says otherwise.

    Example:
        Load a configuration file and override the seed from the environment:
        ```python
        import os
        from prefect_octacage.config import load_config

        os.environ["OCTACAGE_QUADRATURE_SEED"] = "7"
        config = load_config("configs/default.cfg")
        assert config.quadrature.seed == 7
        ```
    """

    a_angstrom: float = Field(
        default=2.05, description="Half diagonal of the cage in Angstrom."
    )
    z_eff: float = Field(
        default=10.0, description="Effective charge of each vertex atom."
    )
    mass_ratio: float = Field(
        default=2.7244e-4,
        description="Electron to positive-particle mass ratio (deuteron by default).",
    )
    r1: float = Field(default=..., description="Effective radius of the s-orbitals.")
    r2: float = Field(default=..., description="Effective radius of the d-orbitals.")
    n_legendre: int = Field(
        default=8, description="Number of Legendre polynomials in the separation."
    )
    z_max: float = Field(default=1.9, description="Upper cutoff of the separation.")
    angular_form: AngularForm = Field(
        default=AngularForm.SQUARED, description="Angular factor of the d-orbitals."
    )
    radial_model: RadialModel = Field(
        default=RadialModel.HYDROGEN_3D, description="Radial shape of the d-orbitals."
    )
    radial_table: Optional[Path] = Field(
        default=None, description="Two-column (rho, g) table for custom-table."
    )
    normalize_per_z: bool = Field(
        default=True,
        description="Renormalize the s-orbitals at every separation node.",
    )
    z_kinetic: ZKinetic = Field(
        default=ZKinetic.FULL,
        description="Differentiate the orbitals (full) or only the polynomials.",
    )
    overlap_threshold: float = Field(
        default=1e-6,
        description="Relative cutoff of overlap eigenvalues in the eigensolver.",
    )
    kinetic_prefactor: Optional[float] = Field(
        default=None,
        description="Override of the electron kinetic prefactor, e.g. 0.264 / a.",
    )
    collision_z0: float = Field(
        default=0.0, description="Separation at which collision densities are read."
    )
    collision_fraction: float = Field(
        default=0.2,
        description="Fraction of the maximum that marks the first collision level.",
    )
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    density: DensitySpec = Field(default_factory=DensitySpec)
    run: RunSpec = Field(default_factory=RunSpec)

    class Config:
        extra = Extra.forbid

    @validator("a_angstrom", "z_eff", "mass_ratio")
    def check_positive(cls, value, field):
        """
        Physical scales must be positive.
        """
        if not value > 0:
            raise ValueError(f"{field.name} must be positive.")
        return value

    @validator("r1", "r2")
    def check_radius(cls, value, field):
        """
        Orbital radii must be positive.
        """
        if not value > 0:
            raise ValueError(f"{field.name} must be positive.")
        return value

    @validator("n_legendre")
    def check_n_legendre(cls, value):
        """
        At least one Legendre polynomial.
        """
        if value < 1:
            raise ValueError("n_legendre must be at least 1.")
        return value

    @validator("z_max")
    def check_z_max(cls, value):
        """
        The separation interval must stay inside the cage.
        """
        if not 0 < value < 2:
            raise ValueError("z_max must lie in (0, 2).")
        return value

    @validator("overlap_threshold", "collision_fraction")
    def check_fraction(cls, value, field):
        """
        Relative thresholds lie strictly between zero and one.
        """
        if not 0 < value < 1:
            raise ValueError(f"{field.name} must lie in (0, 1).")
        return value

    @validator("kinetic_prefactor")
    def check_kinetic_prefactor(cls, value):
        """
        An override must be positive.
        """
        if value is not None and not value > 0:
            raise ValueError("kinetic_prefactor must be positive.")
        return value

    @root_validator(skip_on_failure=True)
    def check_consistency(cls, values):
        """
        Cross-field checks: radial table, collision point and sweep range.
        """
        if (
            values["radial_model"] == RadialModel.CUSTOM_TABLE
            and values["radial_table"] is None
        ):
            raise ValueError("radial_model custom-table requires radial_table.")
        if not 0 <= values["collision_z0"] <= values["z_max"]:
            raise ValueError("collision_z0 must lie in [0, z_max].")
        if values["sweep"].l_max > 0.5 * values["z_max"]:
            raise ValueError("sweep.l_max must not exceed z_max / 2.")
        if not 0 < values["sweep"].reference_l <= 0.5 * values["z_max"]:
            raise ValueError("sweep.reference_l must lie in (0, z_max / 2].")
        return values

    @property
    def kappa(self) -> float:
        """
        Electron kinetic prefactor, the override if one is configured.
        """
        if self.kinetic_prefactor is not None:
            return self.kinetic_prefactor
        return kinetic_prefactor(self.a_angstrom)

    @property
    def cage(self) -> Octahedron:
        """
        The cage in internal units, carrying its physical size.
        """
        return Octahedron(a_angstrom=self.a_angstrom)

    @property
    def delta(self) -> float:
        """
        Coulomb softening length.
        """
        return self.quadrature.delta

    def orbital_parameters(self) -> OrbitalParameters:
        """
        The orbital shape parameters of this configuration.
        """
        return OrbitalParameters(
            r1=self.r1,
            r2=self.r2,
            angular_form=self.angular_form,
            radial_model=self.radial_model,
            radial_table=self.radial_table,
        )

    def l_grid(self) -> np.ndarray:
        """
        The configured grid of half-separations.
        """
        return np.linspace(self.sweep.l_min, self.sweep.l_max, self.sweep.l_points)

    def z_grid(self) -> np.ndarray:
        """
        The output grid of the projected densities.
        """
        return np.linspace(0.0, self.z_max, self.density.grid_points)

    def with_updates(self, **updates) -> "CageConfig":
        """
        Returns a validated copy with dotted keys replaced, e.g.
        `with_updates(**{"quadrature.delta": 1e-4})`.
        """
        nested = _nest({**flatten_config(self), **updates})
        return CageConfig.parse_obj(nested)


def known_keys() -> List[str]:
    """
    Every flat configuration key in declaration order.
    """
    keys = []
    for name, field in CageConfig.__fields__.items():
        if name in SECTIONS:
            keys += [f"{name}.{key}" for key in field.type_.__fields__]
        else:
            keys.append(name)
    return keys


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def flatten_config(config: CageConfig) -> Dict[str, object]:
    """
    Flat `{dotted key: value}` view of a configuration, `None` values omitted.
    """
    flat = {}
    for name in CageConfig.__fields__:
        value = getattr(config, name)
        if name in SECTIONS:
            for key in value.__fields__:
                flat[f"{name}.{key}"] = getattr(value, key)
        elif value is not None:
            flat[name] = value
    return flat


def _nest(flat: Mapping[str, object]) -> Dict[str, object]:
    nested: Dict[str, object] = {}
    for key, value in flat.items():
        section, _, name = key.rpartition(".")
        if section:
            nested.setdefault(section, {})[name] = value
        else:
            nested[name] = value
    return nested


def _parse_lines(text: str, source: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = COMMENT.split(raw, 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(
                f"{source}:{number}: expected 'key = value', got {raw.strip()!r}."
            )
        key = key.strip()
        if key in values:
            raise ConfigurationError(f"{source}:{number}: duplicate key {key!r}.")
        values[key] = value.strip()
    return values


def _environment_overrides(environ: Mapping[str, str]) -> Dict[str, str]:
    by_env_name = {
        ENV_PREFIX + key.replace(".", "_").upper(): key for key in known_keys()
    }
    overrides = {}
    for name, value in environ.items():
        if not name.upper().startswith(ENV_PREFIX):
            continue
        key = by_env_name.get(name.upper())
        if key is None:
            raise ConfigurationError(
                f"Unknown environment override {name!r}; expected one of "
                f"{sorted(by_env_name)}."
            )
        logger.debug("Environment override %s = %s", key, value)
        overrides[key] = value
    return overrides


def parse_config(
    text: str,
    environ: Optional[Mapping[str, str]] = None,
    source: str = "<config>",
    base_dir: Optional[Path] = None,
) -> CageConfig:
    """
    Parses the flat configuration format.

    Args:
        text: Lines of `key = value`, with `#` comments and dotted section keys.
        environ: Environment used for `OCTACAGE_<SECTION>_<KEY>` overrides; defaults
            to `os.environ`.
        source: Name used in error messages.
        base_dir: Directory that a relative `radial_table` in `text` is resolved
            against; environment values are used as given.

    Returns:
        The validated configuration.

    Raises:
        ConfigurationError: On syntax errors, unknown or missing keys and invalid
            values.
    """
    values = _parse_lines(text, source)
    if base_dir is not None and "radial_table" in values:
        table = Path(values["radial_table"])
        if not table.is_absolute():
            values["radial_table"] = str(Path(base_dir) / table)
    values.update(_environment_overrides(os.environ if environ is None else environ))

    allowed = set(known_keys())
    for key in values:
        if key not in allowed:
            raise ConfigurationError(f"{source}: unknown configuration key {key!r}.")
    for name, field in CageConfig.__fields__.items():
        if field.required and name not in values:
            raise ConfigurationError(
                f"{source}: missing mandatory configuration key {name!r}."
            )

    try:
        return CageConfig.parse_obj(_nest(values))
    except ValidationError as exc:
        raise ConfigurationError(f"{source}: invalid configuration: {exc}") from exc


def load_config(
    path, environ: Optional[Mapping[str, str]] = None
) -> CageConfig:
    """
    Reads and parses a configuration file; I/O errors propagate as `OSError`.

    A relative `radial_table` is taken relative to the file's directory.
    """
    path = Path(path)
    return parse_config(
        path.read_text(), environ=environ, source=str(path), base_dir=path.parent
    )


def echo_config(config: CageConfig) -> str:
    """
    Canonical flat form of a configuration: declaration order, `repr` floats.

    Parsing the echo gives back an identical configuration.
    """
    return "".join(
        f"{key} = {_format_value(value)}\n"
        for key, value in flatten_config(config).items()
    )


def config_hash(config: CageConfig) -> str:
    """
    First 16 hex digits of the SHA-256 digest of the canonical echo.
    """
    return hashlib.sha256(echo_config(config).encode("utf-8")).hexdigest()[:16]


def parse_float_list(text: str) -> Tuple[float, ...]:
    """
    Parses a comma separated list such as `0.3,0.6`.
    """
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError as exc:
        raise ConfigurationError(f"Cannot parse number list {text!r}.") from exc
