"""Exceptions raised by prefect-octacage"""


class OctacageError(Exception):
    """
    Base class for all errors raised by this collection.
    """


class ConfigurationError(OctacageError, ValueError):
    """
    Raised when a configuration file or environment override cannot be turned into a
    valid `CageConfig`.
    """


class NumericalError(OctacageError, RuntimeError):
    """
    Base class for failures of the numerical pipeline.
    """


class QuadratureError(NumericalError):
    """
    Raised when an integrand produces non-finite values at a quadrature node.
    """


class BasisError(NumericalError):
    """
    Raised when orbitals are evaluated before their normalization is fixed, or when a
    normalization integral vanishes.
    """


class EigensolverError(NumericalError):
    """
    Raised when the generalized eigenproblem cannot be reduced, e.g. because every
    overlap direction falls below the filtering threshold.
    """
