"""Exception hierarchy shared by all modules."""


class IwaflatError(Exception):
    """Base class for library errors."""


class InputError(IwaflatError, ValueError):
    """Malformed input: wrong shape, asymmetric where symmetric is required, ..."""


class DegenerateInputError(InputError):
    """Input is (numerically) linearly dependent or singular."""


class NumericalError(IwaflatError, ArithmeticError):
    """Non-finite arithmetic inside a solver."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NotFoundError(IwaflatError):
    """A search exhausted its budget without an accepted result."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StiffnessError(IwaflatError):
    """Adaptive step size underflowed; carries the partial trajectory."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConsistencyError(IwaflatError):
    """Two routes that must agree (ODE vs. direct decomposition) disagree."""


class InvariantFailure(IwaflatError, AssertionError):
    """A checked invariant was violated."""
