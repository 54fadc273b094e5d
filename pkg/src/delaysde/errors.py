"""Exception hierarchy shared by all modules."""


class DelaySDEError(Exception):
    """Base class for all errors raised by delaysde."""


class ConfigError(DelaySDEError, ValueError):
    """Invalid user input: malformed measure, bad experiment config, missing file."""


class OrderExceededError(DelaySDEError, ValueError):
    pass


class RegionTooLargeError(DelaySDEError):
    """Root search exceeded its cell budget."""


class NonConvergenceError(DelaySDEError):
    pass


class InconsistentMultiplicityError(DelaySDEError):
    """Leading Taylor coefficient of h at a claimed root of order m vanishes."""


class GridAlignmentError(DelaySDEError, ValueError):
    pass


class RegimeError(DelaySDEError, ValueError):
    """Operation requires a different stability regime."""


class DegenerateDenominatorError(DelaySDEError, ArithmeticError):
    pass


class EmptySampleError(DelaySDEError, ValueError):
    pass
