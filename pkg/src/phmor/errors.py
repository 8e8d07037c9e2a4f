"""Exception hierarchy shared by all phmor modules."""


class PhmorError(Exception):
    """Base class for all errors raised by phmor."""


class SingularPencil(PhmorError, ArithmeticError):
    """A Lyapunov/Sylvester equation is not uniquely solvable."""


class FeedthroughSingular(PhmorError, ArithmeticError):
    """``D + D^T`` is singular, so the passivity Riccati equation is undefined."""


class NoStableInvariantSubspace(PhmorError, ArithmeticError):
    """The Hamiltonian pencil has eigenvalues on (or too close to) the imaginary axis."""


class IndefiniteSolution(PhmorError, ArithmeticError):
    """The minimal Riccati solution is indefinite; the system is not passive."""


class NotFeasible(PhmorError, ValueError):
    """A matrix does not satisfy the KYP inequality."""


class NotPositiveDefinite(PhmorError, ValueError):
    pass


class NotInInterior(PhmorError, ValueError):
    """The KYP matrix is not positive definite at the requested point."""


class SingularShift(PhmorError, ArithmeticError):
    """``sI - A`` is singular at the requested evaluation point."""


class StepFactorizationFailed(PhmorError, ArithmeticError):
    pass


class Unstable(PhmorError, ValueError):
    """The state matrix has eigenvalues in the closed right half plane."""


class NonzeroFeedthrough(PhmorError, ValueError):
    """H2 norms are infinite for systems with a nonzero feedthrough."""


class FeedthroughMismatch(PhmorError, ValueError):
    pass


class RankDeficient(PhmorError, ArithmeticError):
    pass


class ShiftSolveSingular(PhmorError, ArithmeticError):
    pass


class NoInteriorPoint(PhmorError, ValueError):
    """No strictly feasible starting point for the barrier method was found."""


class DimensionMismatch(PhmorError, ValueError):
    pass


class ParseError(PhmorError, ValueError):
    """Malformed system file; carries the offending line and column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class IoError(PhmorError, OSError):
    """A result file could not be written."""
