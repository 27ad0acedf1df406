"""Exception hierarchy shared across the package."""


class GapscopeError(Exception):
    """Base class for all errors raised by this package."""

    stage = "gapscope"


class InputError(GapscopeError):
    """Malformed or inconsistent caller input."""

    stage = "input"


class DimensionMismatchError(InputError):
    """Vector/matrix shapes do not agree with declared dimensions."""


class SchemaError(InputError):
    """JSON spec violates the expected schema; carries a JSON-pointer path."""

    def __init__(self, pointer, message):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


class GridError(GapscopeError):
    """A time instant or interval is not resolved by the control grid."""

    stage = "grid"


class DivergenceError(GapscopeError):
    """Non-finite state encountered during integration."""

    stage = "integrate"

    def __init__(self, step, message="non-finite state during integration"):
        super().__init__(f"{message} (step {step})")
        self.step = step


class UnsupportedDimensionError(GapscopeError):
    """Generator enumeration requested beyond the supported dimension."""

    stage = "cones"


class LinearProgramError(GapscopeError):
    """LP instance outside the solver's supported shape or state."""

    stage = "lp"


class UnboundedError(LinearProgramError):
    """LP objective unbounded below over the feasible set."""


class InfeasibleError(LinearProgramError):
    """LP has no feasible point."""


class SingularityError(GapscopeError):
    """Matrix rank-deficient where full row rank is required."""

    stage = "open_mapping"


class DivisionGuardError(GapscopeError):
    """Denominator below the safe threshold (callers must branch)."""

    stage = "open_mapping"


class NonConvergenceError(GapscopeError):
    """Fixed-point iteration stopped short of the residual target."""

    stage = "open_mapping"

    def __init__(self, best_residual, best_point, iterations):
        super().__init__(
            f"residual target not reached after {iterations} iterations "
            f"(best residual {best_residual:.3e})"
        )
        self.best_residual = best_residual
        self.best_point = best_point
        self.iterations = iterations


class PreconditionError(GapscopeError):
    """Operation precondition violated (e.g. infeasible process)."""

    stage = "precondition"


class ConsistencyError(GapscopeError):
    """Internal cross-check failed beyond its tolerance."""

    stage = "consistency"


class NotInvertibleError(GapscopeError):
    """Space-time process has a pure-impulse cell (w0 = 0); no preimage."""

    stage = "impulsive"


class HorizonMismatchError(GapscopeError):
    """Reparameterization constant d falls outside [-0.5, 0.5]."""

    stage = "impulsive"


class HypothesisViolationError(GapscopeError):
    """A theorem hypothesis required by a check does not hold."""

    stage = "impulsive"
