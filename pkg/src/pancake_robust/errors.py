"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: invalid input and size guards exit 1,
failed premise or property checks exit 2, I/O problems exit 3.
"""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class EmptySelectionError(InvalidInputError):
    """A role filter or test set selected no points."""


class SizeGuardError(InvalidInputError):
    """Exact subset enumeration was requested above the size limit."""


class DegenerateDirectionError(InvalidInputError):
    """A direction is parallel to the reference separator."""


class InfeasibleSpecError(RuntimeError):
    """Rejection sampling exhausted its draw budget before producing n points."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite gradient (corrupt input data)."""
