"""Exception hierarchy shared across the package."""


class CountgraphError(Exception):
    """Base class for all package-specific errors."""


class DivergenceError(CountgraphError):
    """A log-mean exceeded the overflow cap; the state is numerically divergent."""


class NonStationaryError(CountgraphError):
    """Parameters describe a non-stationary latent process."""


class NumericalError(CountgraphError):
    """A linear-algebra step failed (non-PD matrix, singular system)."""


class FitDivergedError(CountgraphError):
    """MCEM objective decreased persistently beyond the Monte Carlo noise band.

    Carries the partial trace in the ``trace`` attribute for diagnostics.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
