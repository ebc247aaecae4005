"""Exception hierarchy shared by every module.

The CLI maps :class:`ValidationError` to exit code 1 and
:class:`NumericalError` to exit code 2.
"""


class StochPecError(Exception):
    """Base class for all package errors."""


class ValidationError(StochPecError, ValueError):
    """Bad input: wrong shape, out-of-range parameter, malformed config."""


class EmptyInputError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class NumericalError(StochPecError, ArithmeticError):
    """A computation failed for numerical reasons (singular matrix, infeasible solve)."""


class NotUnitaryError(NumericalError):
    pass


class DimensionReductionError(NumericalError):
    """Memory-state Gram matrix is rank deficient; the states should be merged."""


class DegenerateTomographyError(NumericalError):
    pass


class SpanDeficiencyError(NumericalError):
    pass


class UnphysicalStateError(NumericalError):
    pass
