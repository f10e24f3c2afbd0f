"""Exception hierarchy shared by all koopgram modules."""


class KoopgramError(Exception):
    """Base class for computational errors raised by koopgram."""


class DimensionError(KoopgramError, ValueError):
    """Array shapes do not match the declared dimensions."""


class NonFiniteError(KoopgramError, ValueError):
    """A map or dictionary produced a NaN or infinite value."""


class DivergenceError(KoopgramError):
    """A simulated state exceeded the divergence cap."""

    def __init__(self, step, magnitude, cap):
        self.step = step
        self.magnitude = magnitude
        self.cap = cap
        super().__init__(
            f"trajectory diverged at step {step}: |x|_max={magnitude:.6g} exceeds cap {cap:.6g}"
        )


class UnstableOperatorError(KoopgramError):
    """Infinite-horizon quantity requested for an operator with spectral radius >= 1."""

    def __init__(self, rho, what="operator"):
        self.rho = rho
        super().__init__(
            f"{what} has spectral radius {rho:.12g} >= 1 - 1e-9; "
            "infinite-horizon sum diverges, use a finite horizon instead"
        )


class ConvergenceError(KoopgramError):
    """An iterative solver did not converge."""


class NotPSDError(KoopgramError, ValueError):
    """A matrix expected to be positive semidefinite is not."""
