"""Exception hierarchy for the cqrp package."""


class CqrpError(Exception):
    """Base class for all package errors."""


class DomainError(CqrpError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class SolverError(CqrpError):
    """Base class for solver failures."""


class UnboundedObjective(SolverError):
    """The piecewise-linear objective decreases without bound (or the
    safeguard box is active at the optimum)."""


class DegenerateDesign(SolverError):
    """The reduced design cannot pin down all free coordinates."""


class InstanceTooLarge(SolverError):
    """Instance exceeds the size limits of the brute-force enumerator."""


class SolverNumericalError(SolverError):
    """Pivoting failed to terminate; indicates numerical trouble."""


class EstimationError(CqrpError):
    """A sequential fit failed; message records the failing grid point."""


class OracleMismatch(CqrpError):
    """Dimension mismatch between data and Monte Carlo oracle moments."""


class SingularDerivative(CqrpError):
    """The derivative matrix of the population moment map is numerically
    singular at a requested point."""


class PartitionMismatch(CqrpError):
    """A grid point falls in no cell of a quantile-region partition."""
