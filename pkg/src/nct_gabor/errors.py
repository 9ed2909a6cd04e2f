"""Exception types raised across the package."""


class NctGaborError(Exception):
    """Base class for all package errors."""


class SingularBasis(NctGaborError, ValueError):
    pass


class RadiusTooLarge(NctGaborError, ValueError):
    pass


class GridMismatch(NctGaborError, ValueError):
    pass


class QuadratureFailure(NctGaborError, ArithmeticError):
    pass


class LatticeMismatch(NctGaborError, ValueError):
    pass


class WrongSide(NctGaborError, ValueError):
    """An adjoint-side element was required (or the other way round)."""


class NotSelfAdjoint(NctGaborError, ValueError):
    pass


class NotInvertible(NctGaborError, ArithmeticError):
    pass


class NoConvergence(NctGaborError, ArithmeticError):
    pass


class NotAFrame(NctGaborError, ArithmeticError):
    pass


class InsufficientSupport(NctGaborError, ValueError):
    pass
