"""Exception hierarchy shared by every module."""


class PrivMPCError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PrivMPCError, ValueError):
    """Inconsistent shapes, alphabets or parameters."""


class InputError(PrivMPCError, ValueError):
    """An argument violates an operation's precondition."""


class PreconditionError(InputError):
    """A mechanism or protocol does not satisfy a required property."""


class DegenerateBudgetError(PrivMPCError, ValueError):
    """Some lambda_i equals 1, so the corner matrix is singular."""


class SolverError(PrivMPCError, RuntimeError):
    """The simplex solver failed numerically or hit its iteration cap.

    ``basis`` holds the last basis (column indices of the standard form).
    """

    def __init__(self, message, basis=None):
        super().__init__(message)
        self.basis = None if basis is None else list(basis)


class ScaleError(PrivMPCError, ValueError):
    """An exhaustive enumeration would exceed its budget."""


class SamplingError(PrivMPCError, RuntimeError):
    """The rejection sampler gave up."""
