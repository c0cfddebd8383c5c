"""Exception types shared across the package."""


class MisreportError(Exception):
    """Base class for all package errors."""


class SchemaError(MisreportError):
    """A required column is missing or the column mapping is inconsistent."""


class ValidationError(MisreportError):
    """Cell-level data problem: non-numeric, non-finite, or out-of-domain value."""


class RoleError(MisreportError):
    """Operation incompatible with the dataset's manipulated/unmanipulated role."""


class SizeError(MisreportError):
    """Too few rows for the requested operation."""


class ShapeError(MisreportError):
    """Array dimension mismatch."""


class UsageError(MisreportError):
    """API contract violation (e.g. mixed agents where one agent is required)."""


class ParameterError(MisreportError):
    """Hyperparameter outside its legal range."""


class ConvergenceError(MisreportError):
    """Iterative solver failed to reach tolerance within its budget."""

    def __init__(self, message: str, violation: float | None = None):
        super().__init__(message)
        self.violation = violation


class EmptyStratumError(MisreportError):
    """A required (agent, feature-value) stratum has no rows."""


class ZeroDenominatorError(MisreportError):
    """A ratio estimand's denominator is exactly zero."""


class NearZeroDenominatorError(ZeroDenominatorError):
    """|delta-prime| fell below the configured floor; the ratio variance explodes."""

    def __init__(self, message: str, delta_prime: float):
        super().__init__(message)
        self.delta_prime = delta_prime


class MatrixError(MisreportError):
    """Covariance matrix fails symmetry/PSD requirements."""


class BootstrapDegeneracyError(MisreportError):
    """Too many bootstrap resamples failed to produce an estimate."""


class SimulationSpecError(MisreportError):
    """A structural equation produced a probability outside [0, 1]."""


class InfeasibleTargetError(MisreportError):
    """The requested misreporting rate cannot be reached for this draw."""

    def __init__(self, message: str, target_mr: float, p1: float):
        super().__init__(message)
        self.target_mr = target_mr
        self.p1 = p1
