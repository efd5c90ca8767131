"""Exception hierarchy shared across the library."""


class ChaosdeError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(ChaosdeError):
    """Construction parameters violate a dimensional precondition."""


class SpaceMismatchError(ChaosdeError):
    """Two objects built over different discretizations were combined."""


class EmbeddingError(ChaosdeError):
    """A function produced non-finite values during embedding."""


class UnsupportedOrderError(ChaosdeError):
    """Requested chaos order exceeds the supported cap."""


class OutOfRangeError(ChaosdeError):
    """A time or parameter lies outside its admissible interval."""


class BlowupError(ChaosdeError):
    """The solver produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class MemoryBudgetError(ChaosdeError):
    """A dense tensor allocation would exceed the configured cap."""


class ConfigError(ChaosdeError):
    """Invalid or inconsistent run configuration."""


class DegenerateLawError(ChaosdeError):
    """Samples are (numerically) constant; no density estimate possible."""
