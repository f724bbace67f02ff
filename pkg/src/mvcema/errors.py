"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto
0 / 2 (input validation) / 3 (numerical failure) / 4 (I/O).
"""


class MvcEmaError(Exception):
    exit_code = 3


class ValidationError(MvcEmaError, ValueError):
    exit_code = 2


class NumericalError(MvcEmaError, ArithmeticError):
    exit_code = 3


class IoError(MvcEmaError, OSError):
    exit_code = 4


# input validation

class NonSymmetric(ValidationError):
    pass


class EmptyVector(ValidationError):
    pass


class DegenerateSpec(ValidationError):
    pass


class InfeasibleFloor(ValidationError):
    pass


class ZeroRow(ValidationError):
    pass


class Malformed(ValidationError):
    def __init__(self, line, message="malformed row"):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NegativeEntry(ValidationError):
    def __init__(self, line, col):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: negative entry")


class RowSumOutOfTolerance(ValidationError):
    def __init__(self, line, total):
        self.line = line
        self.total = total
        super().__init__(f"line {line}: row sums to {total!r}, not 1")


# numerical failures

class RankDeficient(NumericalError):
    pass


class Diverged(NumericalError):
    pass


class IndefiniteQk(NumericalError):
    def __init__(self, k, min_eig):
        self.k = k
        self.min_eig = min_eig
        super().__init__(
            f"G-subproblem {k} is not positive definite (smallest eigenvalue {min_eig:.3g}); "
            "the volume weight is too large")


class InitRankFailure(NumericalError):
    pass


class DegenerateInitVolume(NumericalError):
    pass


def with_iteration(err, iteration):
    """Attach outer-iteration context to a numerical error and return it."""
    err.iteration = iteration
    if err.args:
        err.args = (f"iteration {iteration}: {err.args[0]}",) + tuple(err.args[1:])
    return err
