"""Exception hierarchy shared by all modules."""


class DiffGSPError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(DiffGSPError):
    pass


class ConfigParseError(ConfigError):
    pass


class ConfigInvalid(ConfigError):
    pass


class DimensionMismatch(DiffGSPError, ValueError):
    pass


class IndexOutOfRange(DiffGSPError, IndexError):
    pass


class NonSymmetric(DiffGSPError, ValueError):
    pass


class NotSymmetric(NonSymmetric):
    pass


class NegativeWeight(DiffGSPError, ValueError):
    pass


class Disconnected(DiffGSPError, ValueError):
    pass


class EigendecompositionFailure(DiffGSPError, ArithmeticError):
    pass


class BudgetOutOfRange(DiffGSPError, ValueError):
    pass


class TooManyCombinations(DiffGSPError, ValueError):
    pass


class EmptySamplingSet(DiffGSPError, ValueError):
    pass


class DimensionCap(DiffGSPError, MemoryError):
    pass


class UnstableH(DiffGSPError, ArithmeticError):
    pass


class NonConvergent(DiffGSPError, ArithmeticError):
    pass


class InvariantViolation(DiffGSPError):
    pass


class GeometryInvalid(DiffGSPError, ValueError):
    pass


class ConnectivityRetryExhausted(DiffGSPError, RuntimeError):
    pass
