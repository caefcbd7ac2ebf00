"""Exception hierarchy.

Every error raised by the library derives from :class:`CoresetError`. The
``exit_code`` attribute is what the command line front end returns when the
error escapes: 2 for bad data, 3 for numerical failure.
"""


class CoresetError(Exception):
    exit_code = 2


# data / argument errors

class EmptyMatrix(CoresetError):
    pass


class EmptyInput(CoresetError):
    pass


class EmptyStream(CoresetError):
    pass


class DimensionMismatch(CoresetError, ValueError):
    pass


class InvalidDims(CoresetError, ValueError):
    pass


class WrongDims(CoresetError, ValueError):
    pass


class NotOrthonormal(CoresetError, ValueError):
    pass


class BadEpsilon(CoresetError, ValueError):
    pass


class KTooLarge(CoresetError, ValueError):
    pass


class ZeroNormRow(CoresetError, ValueError):
    pass


class InvalidMatrix(CoresetError, ValueError):
    pass


# numerical failures

class NumericalError(CoresetError):
    exit_code = 3


class OracleInconsistency(NumericalError):
    pass


class DegenerateStep(NumericalError):
    """Line search segment has zero length: the iterate already sits on the vertex."""


class NumericalBreakdown(NumericalError):
    pass


class ZeroDenominator(NumericalError):
    pass
