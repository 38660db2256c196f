"""Exception hierarchy shared by all armarg modules."""

from __future__ import annotations

__all__ = [
    "ArmargError",
    "InvalidParameterError",
    "InvalidCovarianceError",
    "NonStationaryError",
    "FactorizationError",
    "UnsupportedOrderError",
    "DegenerateSamplingError",
    "EstimationFailure",
]


class ArmargError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ArmargError, ValueError):
    """A parameter is outside its admissible domain."""


class InvalidCovarianceError(ArmargError, ValueError):
    """A covariance sequence is not positive semidefinite."""


class NonStationaryError(ArmargError, ValueError):
    """An operation requiring stationarity received a non-stationary model."""


class FactorizationError(ArmargError, ArithmeticError):
    """Spectral factorization of a covariance sequence failed."""


class UnsupportedOrderError(ArmargError, ValueError):
    """A Taylor order was requested for which no closed form is available."""


class DegenerateSamplingError(ArmargError, ArithmeticError):
    """The sampling interval hits a node where the discrete map is undefined."""


class EstimationFailure(ArmargError, RuntimeError):
    """An estimator failed to converge or the likelihood is singular.

    Parameters
    ----------
    message : str
        Human readable reason.
    best : object, optional
        Best iterate found before giving up, if any.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
