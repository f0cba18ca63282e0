"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalFailure
(and subclasses) -> 3, BlowUpSuspected -> 4.
"""


class GpsplitError(Exception):
    """Base class for all package errors."""


class ConfigError(GpsplitError):
    """Invalid input, bad configuration, or malformed config file."""


class ShapeError(ConfigError):
    """Array sizes do not match the grid or basis they are used with."""


class NumericalFailure(GpsplitError):
    """A numerical routine produced unusable output (non-convergence,
    non-finite values)."""


class ReferenceUnreliable(NumericalFailure):
    """The fine-step reference solution failed its self-consistency check."""


class InsufficientData(GpsplitError):
    """Not enough usable points for a least-squares order fit."""


class BlowUpSuspected(GpsplitError):
    """A trajectory left the trusted regime (non-finite values or runaway
    energy norm); carries the offending step index."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"blow-up suspected at step {step}")
