"""Exception types raised by radonrange."""


class RadonError(Exception):
    """Base class for all library errors."""


class SingularAction(RadonError, ValueError):
    pass


class RankDeficient(RadonError, ValueError):
    pass


class QuadratureOverflow(RadonError, ValueError):
    pass


class EvalFailure(RadonError, ArithmeticError):
    pass


class IndexOutOfRange(RadonError, IndexError):
    pass


class NotHyperplane(RadonError, ValueError):
    pass


class InsufficientDecay(RadonError, ValueError):
    pass


class UnderdeterminedFit(RadonError, ValueError):
    pass


class UnsupportedDimension(RadonError, ValueError):
    pass


class NotOrthonormal(RadonError, ValueError):
    pass


class OnIncidence(RadonError, ZeroDivisionError):
    pass


class FormatError(RadonError, ValueError):
    """Malformed artifact file."""
