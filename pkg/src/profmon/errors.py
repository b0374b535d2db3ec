"""Exception types raised across the package."""

from __future__ import annotations


class ProfmonError(Exception):
    """Base class for all package-specific errors."""


class InsufficientSamplesError(ProfmonError):
    """Too few profiles for the requested estimate or calibration split."""


class SingularCovarianceError(ProfmonError):
    """Covariance is not positive definite even after the jitter ladder."""


class InvalidOrderIndexError(ProfmonError):
    """Reference size and target ARL do not yield an integer order index k >= 2."""


class InfiniteRunLengthError(ProfmonError):
    """The requested chart has infinite in-control ARL (order index k = 1)."""


class UnsupportedProcessError(ProfmonError):
    """Operation is undefined for this process kind (e.g. moments of a switch regime)."""


class CalibrationError(ProfmonError):
    """Monte Carlo calibration cannot reach the requested false-alarm rate."""


class CsvFormatError(ProfmonError):
    """Profile CSV could not be parsed; message carries row/column diagnostics."""


class ConfigError(ProfmonError):
    """Experiment configuration file is malformed or inconsistent."""
