"""Exception types raised across the toolkit."""


class SkeldynError(Exception):
    """Base class for all toolkit errors."""


class OutOfDomain(SkeldynError, ValueError):
    """A point lies outside the square [-L, L]^2 or the rectangle Omega."""


class InvalidBounds(SkeldynError, ValueError):
    """Derivative bounds or norm parameters violate their preconditions."""


class NotAdmissible(SkeldynError, ValueError):
    """Linear-family parameters fail |a| < (|b| - S) / sqrt(S).

    Attributes
    ----------
    S : float
        The admissibility constant.
    bound : float
        ``(|b| - S) / sqrt(S)``, the strict upper bound on ``|a|``.
    borderline : bool
        True when ``|a|`` sits within the guard band of the bound.
    """

    def __init__(self, message, S, bound, borderline=False):
        super().__init__(message)
        self.S = S
        self.bound = bound
        self.borderline = borderline


class EmptyRegion(SkeldynError, ValueError):
    """An oscillation region meets no grid cell."""


class DegenerateGrid(SkeldynError, ValueError):
    """Grid resolution or sample count too small."""


class NoConvergence(SkeldynError, RuntimeError):
    """Power iteration or eigen-solver did not converge.

    ``residuals`` holds the L1 step residual of each iteration so callers
    can dump the trace.
    """

    def __init__(self, message, max_iters=None, residuals=()):
        super().__init__(message)
        self.max_iters = max_iters
        self.residuals = list(residuals)


class BranchInversionFailure(SkeldynError, RuntimeError):
    """A closed-form preimage fell outside its piece."""

    def __init__(self, message, k):
        super().__init__(message)
        self.k = k


class OrbitHalted(SkeldynError, RuntimeError):
    """An orbit landed on the boundary set where no branch applies.

    ``step`` is the index of the value that could not be computed and
    ``values`` the part of the orbit computed before halting.
    """

    def __init__(self, step, values):
        super().__init__(f"orbit halted at step {step}: point on the boundary set")
        self.step = step
        self.values = values


class InsufficientSignal(SkeldynError, ValueError):
    """Fewer than four usable lags above the noise floor."""


class NotDecaying(SkeldynError, ValueError):
    """Log-linear fit of a covariance curve has a non-negative slope."""


class ExcessiveHalting(SkeldynError, RuntimeError):
    """Too many Monte Carlo trajectories hit the boundary set."""


class ConfigError(SkeldynError, ValueError):
    """A map configuration file is malformed; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
