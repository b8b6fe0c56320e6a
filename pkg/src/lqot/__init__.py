"""Optimal transport with costs given by linear-quadratic optimal control."""

from .errors import (
    ConfigError,
    IncompatibleMarginals,
    LQOTError,
    NumericalError,
    ValidationError,
)
from .fiber import (
    FiberCostModel,
    FiberDynamics,
    NoncontrollableCost,
    compatibility_check,
    disintegrate,
    eval_fiber_cost,
    fiber_cost_model,
    fiber_dynamics,
    forced_hamiltonian_solution,
    solve_noncontrollable,
)
from .linsys import (
    ControllabilityReport,
    LinearQuadraticSystem,
    controllability_subspace,
    kalman_decomposition,
    matrix_exponential,
    validate_system,
)
from .lqcost import (
    CostModel,
    cost_matrices,
    eval_cost,
    grammian_cost,
    optimal_trajectory,
    pairwise_cost,
)
from .oracle import enumerate_ot, extrapolated_min_cost, min_cost_piecewise
from .transport import (
    DiscreteMeasure,
    DualPotentials,
    TransportPlan,
    cyclical_monotonicity_check,
    make_measure,
    quadratic_reduction,
    solve_discrete_ot,
)

__version__ = "0.1.0"
