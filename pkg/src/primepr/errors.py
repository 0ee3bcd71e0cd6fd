"""Exception hierarchy shared by every module."""


class PrimeError(Exception):
    """Base class for all errors raised by primepr."""


class InvalidArgumentError(PrimeError, ValueError):
    pass


class DegenerateMatrixError(PrimeError, ArithmeticError):
    """A matrix-vector product vanished during power iteration."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"matrix-vector product vanished at step {step}")


class SingularGramError(PrimeError, ArithmeticError):
    """The Gram matrix AA^H is (numerically) rank deficient."""


class DegenerateInitError(PrimeError, ArithmeticError):
    """Spectral initialization is undefined (all measurements zero)."""


class BacktrackingDivergedError(PrimeError, ArithmeticError):
    """The inner backtracking loop on E exceeded its pass budget."""
