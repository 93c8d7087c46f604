"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI uses when it escapes a
command.
"""


class AmodalSizeError(Exception):
    exit_code = 1


class InputError(AmodalSizeError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class NumericalError(AmodalSizeError, ArithmeticError):
    """A numerical problem that has no usable answer."""

    exit_code = 3


class RankDeficiencyError(NumericalError):
    """A least-squares system does not determine its unknowns."""

    def __init__(self, message, rank=None, n_unknowns=None):
        super().__init__(message)
        self.rank = rank
        self.n_unknowns = n_unknowns


class NotConvergedWarning(UserWarning):
    """An iterative solver stopped at ``max_iters`` without meeting ``tol``."""

    exit_code = 4
