"""Exception hierarchy shared across the package."""


class ThinMarketError(ValueError):
    """Base class for all package errors."""


class DataError(ThinMarketError):
    """Malformed or inconsistent input data."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class WindowError(ThinMarketError):
    """A requested window falls outside the available data."""


class FitError(ThinMarketError):
    """A model could not be estimated on the given data."""


class NotFittedError(ThinMarketError):
    """Forecast requested from a model that has not been fitted."""


class AllModelsFailed(ThinMarketError):
    """No model produced a forecast for a day that needs one."""
