"""Exception types shared across the package."""


class ByzDetectError(Exception):
    """Base class for all package errors."""


class ConfigError(ByzDetectError, ValueError):
    """Invalid scenario, detector, attack or pair specification."""


class OutOfSupport(ByzDetectError, ValueError):
    """A measurement lies outside the support of a discrete pair."""


class DegeneratePair(ByzDetectError, ValueError):
    """The two hypotheses are (numerically) indistinguishable."""


class RangeError(ByzDetectError, ValueError):
    """Argument outside the domain on which a quantity is defined."""


class UnsupportedPair(ByzDetectError, TypeError):
    """Operation requires a pair family that was not supplied."""


class InsufficientData(ByzDetectError, ValueError):
    """Too few usable points for an exponent fit."""


class NumericalFailure(ByzDetectError, ArithmeticError):
    """A solver failed to converge or produced non-finite output."""
