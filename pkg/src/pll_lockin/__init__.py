"""Hold-in, pull-in and conservative lock-in ranges of a lead-lag PLL with a
triangular phase detector."""

from .estimator import ConservativeLockInEstimator
from .exceptions import (
    ConditionInapplicable,
    InvalidParameters,
    NoBracket,
    NoEquilibria,
    OutOfRange,
    PLLError,
    SignFlip,
    SingularPoint,
    SolverError,
    StepUnderflow,
    Undecided,
)
from .lockin import (
    LockInSolution,
    ReducedParameters,
    ReducedState,
    XiCase,
    conservative_lock_in,
    first_integral_A,
    first_integral_B,
    lock_in_equations,
    lock_in_residual,
    reduced_parameters,
    reduced_vector_field,
    separatrix_initial_value,
    solve_y_ab,
    tau2_for_damping,
    to_reduced,
)
from .model import (
    EquilibriumKind,
    EquilibriumPoint,
    LoopParameters,
    PhaseState,
    classify_equilibrium,
    dissipativity_bound,
    equilibria,
    hold_in_frequency,
    pd_slope,
    pd_value,
    vector_field,
)
from .oracle import (
    Trajectory,
    frequency_step,
    integrate_trajectory,
    numeric_conservative_lock_in,
    numeric_lock_in,
    trace_separatrix,
)
from .stability import (
    StabilityReport,
    beta0,
    beta0_from_integrals,
    global_stability_condition,
    pull_in_lower_bound,
)

__version__ = "0.1.0"
