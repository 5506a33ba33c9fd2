"""Exception hierarchy.

Two families matter to callers: :class:`ConfigError` (bad input, CLI exit
code 2) and :class:`NumericalError` (a well-formed problem that cannot be
solved, CLI exit code 3).
"""


class UwOfdmError(Exception):
    """Base class for all package errors."""


class ConfigError(UwOfdmError, ValueError):
    pass


class DimensionMismatch(ConfigError):
    pass


class SearchSpaceTooLarge(ConfigError):
    pass


class OddBitCount(ConfigError):
    pass


class ParseError(ConfigError):
    pass


class LengthExceedsN(ConfigError):
    pass


class InvalidDelaySpread(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass


class LengthOdd(ConfigError):
    pass


class UnknownKind(ConfigError):
    pass


class NonpositiveVariance(ConfigError):
    pass


class NumericalError(UwOfdmError, ArithmeticError):
    pass


class SingularM22(NumericalError):
    """Redundant-carrier placement makes the tail block of the IDFT singular."""


class RankDeficient(NumericalError):
    pass


class ZeroChannelGain(NumericalError):
    """A subcarrier needed by a diagonal inversion sits in a perfect null."""


class SingularInnerMatrix(NumericalError):
    pass


class ZeroNoise(NumericalError):
    pass


class ChannelResampleLimitExceeded(NumericalError):
    pass


class IoError(UwOfdmError, OSError):
    """Output could not be written; the CLI reports it like a config error."""
