"""
Exception hierarchy shared by the core library and the command-line front end.
"""

from typing import Optional


class CsvacError(Exception):
    """Base class for every error raised by this package."""


class ThermoDomainError(CsvacError, ValueError):
    """Input outside the domain of a physical formula (NaN energy, negative rate, ...)."""


class SolverError(CsvacError, RuntimeError):
    """A numerical solve failed; `diagnostics` holds what the solver saw."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CapabilityError(SolverError):
    """Requested gain cannot be reached at the configured supply."""

    def __init__(self, message: str, max_gain: float, diagnostics: Optional[dict] = None):
        super().__init__(message, diagnostics)
        self.max_gain = max_gain


class FitError(CsvacError, ValueError):
    """Regression design is rank deficient."""


class ConfigError(CsvacError, ValueError):
    """Unknown command or key, missing key, or malformed value in a run configuration."""
