"""Sequential censored quantile regression processes.

Grid-sequential estimation of linear conditional quantile processes under
random right censoring, with pointwise adaptive and quantile-region
average L1 penalties, mass-redistribution cross-validation for the
penalty level, simulation models, a Monte Carlo harness and asymptotic
diagnostics.
"""

from .errors import (
    CqrpError,
    DegenerateDesign,
    DomainError,
    EstimationError,
    InstanceTooLarge,
    OracleMismatch,
    PartitionMismatch,
    SingularDerivative,
    SolverError,
    SolverNumericalError,
    UnboundedObjective,
)
from .solver import (
    CoefVector,
    PWLProblem,
    active_backend,
    brute_force_solve,
    check_optimality,
    directional_derivative,
    objective_value,
    solve_pwl_l1,
    solve_weighted_qr,
)

__version__ = "0.1.0"

__all__ = [
    "CqrpError",
    "DomainError",
    "SolverError",
    "UnboundedObjective",
    "DegenerateDesign",
    "InstanceTooLarge",
    "SolverNumericalError",
    "EstimationError",
    "OracleMismatch",
    "SingularDerivative",
    "PartitionMismatch",
    "PWLProblem",
    "CoefVector",
    "solve_pwl_l1",
    "brute_force_solve",
    "check_optimality",
    "directional_derivative",
    "objective_value",
    "solve_weighted_qr",
    "active_backend",
    "__version__",
]
