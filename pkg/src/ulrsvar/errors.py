"""Exception and warning types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not match what an operation needs."""


class NonStationaryError(ValueError):
    """A dynamic matrix has spectral radius >= 1 (or a drift without positive real parts)."""


class DegenerateError(ValueError):
    """Input carries no variation, so the requested quantity is undefined."""


class WindowError(ValueError):
    """A sample window does not fit inside the observed series."""


class IngestError(ValueError):
    """Malformed CSV input. The message carries the offending line number."""


class ClippedCovarianceWarning(UserWarning):
    """A moment-based covariance estimate had negative eigenvalues that were clipped to 0."""
