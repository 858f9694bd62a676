"""Exception hierarchy shared across the package.

Every failure mode raised by the library derives from MartkitError so
callers (and the CLI) can map errors to exit codes without string matching.
"""


class MartkitError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MartkitError, ValueError):
    """An argument violates a documented precondition (e.g. non-finite input)."""


class InsufficientDataError(MartkitError):
    """The sample is too short for the requested operation."""


class DegenerateCoefficientError(MartkitError):
    """Identification normalization is impossible (zero first row-coefficient matrix)."""


class StationarityError(MartkitError):
    """Simulation refused: the coefficient set fails the sufficient stationarity bound."""


class EstimationError(MartkitError):
    """Estimation failed (e.g. no admissible threshold candidates)."""


class InferenceError(MartkitError):
    """Asymptotic inference failed (e.g. numerically singular information matrix)."""


class BandwidthError(MartkitError):
    """Kernel weights degenerate: bandwidth too small for the sample."""


class DataFormatError(MartkitError):
    """A data file violates the documented CSV/JSON schema."""
