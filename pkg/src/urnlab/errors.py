"""Exception hierarchy.

Names follow the failure they report; every class derives from
:class:`UrnError` so callers can catch the whole family at once.
"""


class UrnError(Exception):
    """Base class for all urnlab errors."""


# -- model construction and configuration ---------------------------------

class ModelError(UrnError, ValueError):
    pass


class NonConstantColumnSum(ModelError):
    pass


class NegativeOffDiagonal(ModelError):
    pass


class DivisibilityViolation(ModelError):
    pass


class EmptyUrn(ModelError):
    pass


class BadFamilyParameter(ModelError):
    pass


class ConfigError(ModelError):
    pass


# -- spectral ---------------------------------------------------------------

class SpectralError(UrnError, ArithmeticError):
    pass


class NotDiagonalizable(SpectralError):
    pass


class IllConditioned(SpectralError):
    pass


class DegenerateBasis(SpectralError):
    pass


class MissingV(SpectralError, ValueError):
    pass


class SingleDominantColor(SpectralError, ValueError):
    pass


# -- simulation -------------------------------------------------------------

class SimulationError(UrnError, RuntimeError):
    pass


class NegativeCount(SimulationError):
    pass


class Overflow(SimulationError, OverflowError):
    pass


# -- martingales ------------------------------------------------------------

class ResonantBeforeStart(UrnError, ValueError):
    pass


class PoleInGamma(UrnError, ArithmeticError):
    pass


class SmallEigenvalue(UrnError, ValueError):
    pass


# -- verification -----------------------------------------------------------

class MissingCheckpoint(UrnError, KeyError):
    pass


class RegimeMismatch(UrnError, ValueError):
    pass


class RootFindingFailure(UrnError, ArithmeticError):
    pass
