"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: DataError -> 2, NumericalError -> 3.
"""


class DataError(ValueError):
    """Malformed or inconsistent input data (parse errors, invariant violations)."""


class NumericalError(RuntimeError):
    """A numerical procedure produced non-finite values or failed to meet its tolerance."""


class EmptyInteractMeshError(RuntimeError):
    """No tetrahedron survived retention: the frame carries no interaction structure.

    Callers are expected to catch this and skip the Laplacian term for the frame.
    """
