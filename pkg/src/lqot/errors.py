"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`LQOTError`.
The CLI maps the three families below onto its exit codes:

* :class:`ValidationError` and :class:`ConfigError` -> 2
* :class:`IncompatibleMarginals` -> 3
* :class:`NumericalError` -> 4
"""


class LQOTError(Exception):
    """Base class for all library errors."""


# --- input validation -------------------------------------------------------


class ValidationError(LQOTError, ValueError):
    """A problem instance violates one of the standing hypotheses."""

    hypothesis = "validation"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ShapeMismatch(ValidationError):
    hypothesis = "shape"


class NonSymmetric(ValidationError):
    hypothesis = "symmetry"


class NotPositiveDefinite(ValidationError):
    hypothesis = "positive-definite"


class NotPositiveSemidefinite(ValidationError):
    hypothesis = "positive-semidefinite"


class PreconditionViolated(ValidationError):
    hypothesis = "precondition"


class EmptyMeasure(ValidationError):
    hypothesis = "non-empty"


class NegativeWeight(ValidationError):
    hypothesis = "non-negative-weights"


class ZeroDensity(ValidationError):
    hypothesis = "positive-density"


class NonFiniteCost(ValidationError):
    hypothesis = "finite-cost"


class ConfigError(LQOTError, ValueError):
    """Malformed configuration document; ``path`` locates the bad field."""

    def __init__(self, message, path=None):
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path


# --- structural failures ----------------------------------------------------


class NotControllable(LQOTError):
    """The closed-form cost needs a controllable pair (A, B)."""


class DegenerateFiber(LQOTError):
    """Fiber machinery needs 1 <= d < n."""


class IncompatibleMarginals(LQOTError):
    """No finite-cost transport exists between the two measures."""

    def __init__(self, message, discrepancy=None, report=None):
        super().__init__(message)
        self.discrepancy = discrepancy
        self.report = report


class NotDeterministic(LQOTError):
    """A plan splits mass from at least one source atom."""

    def __init__(self, message, split_sources=()):
        super().__init__(message)
        self.split_sources = list(split_sources)


class TooLarge(LQOTError):
    """Brute-force oracle asked to run outside its size bounds."""


class UnreachableEndpoint(LQOTError):
    """The endpoint constraint cannot be met by the admissible controls."""


# --- numerical failures -----------------------------------------------------


class NumericalError(LQOTError, ArithmeticError):
    """A computation lost too much accuracy to be trusted."""


class MatrixExponentialOverflow(NumericalError, OverflowError):
    pass


class IllConditioned(NumericalError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class ConsistencyFailure(NumericalError):
    """An identity that must hold exactly was violated beyond tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


class QuadratureError(NumericalError):
    pass


class Infeasible(NumericalError):
    pass


class NumericalStall(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
