"""Exception hierarchy shared by all modules."""


class SparseCovError(Exception):
    """Base class for errors raised by sparsecov."""


class InputError(SparseCovError, ValueError):
    """Invalid user input (shape, finiteness, range)."""


class NotPositiveDefiniteError(SparseCovError, ValueError):
    """A matrix required to be SPD failed its Cholesky factorization."""


class DegenerateVariableError(InputError):
    """A variable has zero sample variance.

    The offending (0-based) index is kept in ``index``.
    """

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"variable {index} has zero sample variance")


class InternalStateError(SparseCovError, RuntimeError):
    """An invariant that the algorithms guarantee was found broken."""
