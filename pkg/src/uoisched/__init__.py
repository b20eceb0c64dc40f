"""Gain-index scheduling for minimizing the uncertainty of information (UoI)
of finite-state Markov sources sharing a limited set of channels.

The library decomposes the scheduling problem into single-bandit belief MDPs
with a service charge, finds the optimal charge by a gradient search on the
concave piecewise-linear dual, computes per-state gain indices, and evaluates
the resulting top-m policy against baselines and an exact joint oracle.
"""

from .belief_mdp import (
    BanditSpec,
    TruncatedBeliefMDP,
    TruncationDiagnostics,
    average_error_bound,
    build_truncated,
    choose_truncation,
    discounted_error_bound,
    truncation_diagnostics,
)
from .errors import (
    ChainError,
    ConfigError,
    DimensionMismatch,
    IndexOutOfRange,
    InfeasiblePolicy,
    MaxItersExceeded,
    MultichainPolicy,
    NoConvergence,
    NotStochastic,
    Periodic,
    Reducible,
    StateSpaceTooLarge,
    TruncationTooDeep,
)
from .index_policy import (
    GainIndexTable,
    gain_index_general,
    gain_indices_average,
    gain_indices_discounted,
    load_table,
    or_decision,
    save_table,
)
from .lagrange import (
    GradientTrace,
    LagrangeProblem,
    derivative_average,
    derivative_discounted,
    gradient_search,
    make_problem,
    objective_derivative,
    objective_value,
)
from .markov import (
    ChainSpec,
    belief_propagate,
    belief_reset,
    entropy,
    n_step_column,
    uoi,
    validate_chain,
)
from .oracle import JointMDP, OracleResult, build_joint, joint_solve_average, joint_solve_discounted
from .rng import Xoshiro256StarStar
from .simulate import (
    AsymptoticSweep,
    RMABInstance,
    SimResult,
    asymptotic_sweep,
    discounted_horizon,
    evaluate_average,
    evaluate_discounted,
    simulate,
)
from .solvers import (
    AVERAGE,
    DISCOUNTED,
    PolicyAndValues,
    active_passive_values,
    average_policy_evaluation,
    policy_evaluation_discounted,
    policy_iteration_discounted,
    solve_average,
    value_iteration_discounted,
)

__version__ = "0.1.0"
