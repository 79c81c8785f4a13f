"""Exception types shared across the package."""


class QadvError(Exception):
    """Base class for all package-specific errors."""


class InvalidInput(QadvError):
    """Malformed or inconsistent input (dimensions, finiteness, priors)."""


class UnsupportedDimension(QadvError):
    """Operation defined only for specific Hilbert-space dimensions."""


class NoFullRankFreeState(QadvError):
    """The free set does not contain the maximally mixed state."""


class NotAResourceState(QadvError):
    """A construction that requires a resource state received a free one."""


class ChannelRequired(QadvError):
    """A user-supplied channel is needed for this input."""


class InvalidChannel(QadvError):
    """A supplied channel failed validation (CPTP or free-set preservation)."""


class PureStateRequired(QadvError):
    """Construction defined for pure input states only."""


class NonConvergence(QadvError):
    """An iterative solver exhausted its budget without meeting tolerance."""

    def __init__(self, message: str, iterations: int = 0, best_gap: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.best_gap = best_gap
