from ._version import __version__  # noqa
from .assembly import MatrixPair, dynamic_matrix, static_electron_matrix  # noqa
from .config import CageConfig, load_config  # noqa
from .eigensolver import Spectrum, solve  # noqa
from .exceptions import (  # noqa
    BasisError,
    ConfigurationError,
    EigensolverError,
    NumericalError,
    OctacageError,
    QuadratureError,
)

__all__ = [
    "BasisError",
    "CageConfig",
    "ConfigurationError",
    "EigensolverError",
    "MatrixPair",
    "NumericalError",
    "OctacageError",
    "QuadratureError",
    "Spectrum",
    "dynamic_matrix",
    "load_config",
    "solve",
    "static_electron_matrix",
]
