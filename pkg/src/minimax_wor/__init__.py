"""Without-replacement stochastic gradient methods for finite-sum minimax
optimization and strongly monotone root finding.

The package provides epoch-based simultaneous descent-ascent, proximal point
and alternating two-timescale methods under reshuffled, fixed-permutation,
incremental, i.i.d. and adversarial index orderings, together with benchmark
problem generators, rate-bound evaluators, exact verification oracles, and a
deterministic experiment harness.
"""

from .core import (
    AffineComponents,
    ConfigurationError,
    DivergenceError,
    FiniteSumOperator,
    GenerationError,
    InputError,
    NumericalError,
    OperatorConstants,
    aggregate,
    as_permutation,
    as_point,
    derive_seed,
    gradient_variance,
    invert_permutation,
    join_xy,
    split_xy,
    splitmix64,
)
from .metrics import (
    BoundParams,
    bound_agda_as,
    bound_agda_rr,
    bound_gda_as,
    bound_gda_wor,
    dist_bound_factor_2pl,
    dist_sq_to_saddle_set_2pl,
    fit_rate_slope,
    lyapunov_v,
    lyapunov_v_2pl,
    relative_sq_distance,
)
from .optimizers import (
    RunConfig,
    Trajectory,
    full_batch_gda,
    ppm_implicit_step,
    run_agda,
    run_gda,
    run_ppm,
    theoretical_step_size_agda,
    theoretical_step_size_gda,
    timescale_ratio,
)
from .oracles import (
    MomentReport,
    affine_operator_constants,
    full_batch_gda_factor,
    optimal_full_batch_alpha,
    prefix_variance_formula,
    wor_moments,
    wor_moments_enumerate,
    wor_moments_montecarlo,
)
from .problems import (
    GameGenConfig,
    QuadraticGame,
    bilinear_lower_bound_instance,
    game_from_json,
    game_to_json,
    generate_quadratic_game,
    quadratic_best_response,
    unbounded_2pl_instance,
)
from .shuffling import (
    AdversaryContext,
    AdversaryKind,
    IndexSchedule,
    ScheduleKind,
    ScheduleSpec,
    epoch_order,
    greedy_max_dist_order,
    parse_schedule,
)

__version__ = "0.1.0"
