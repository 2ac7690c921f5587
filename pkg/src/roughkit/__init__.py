"""Deterministic pathwise toolkit for rough-path numerics.

Submodules: paths (sampled paths, p-variation), tensor_algebra (truncated
tensors, words, shuffle), signatures, rough_core (lifts, rough integration,
RDEs), stopping (signature stopping policies, pricing), filtering
(Kalman-Bucy, penalty-based robust estimation), control (pathwise control
lab), cli (batch runner).
"""

from . import (
    control,
    filtering,
    paths,
    rough_core,
    signatures,
    stopping,
    tensor_algebra,
)
from ._kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION
from .control import (
    ControlGrid,
    ControlProblem,
    PiecewiseControl,
    cost,
    degeneracy_demo,
    dpp_check,
    driver_continuity_scan,
    hjb_residual,
    value,
    value_table,
    verification_probe,
)
from .errors import ArgumentError, DivergenceError, DomainError
from .filtering import (
    FilterState,
    LinearGaussianModel,
    PenaltyConfig,
    Schedule,
    filtering_cost,
    innovation,
    kalman_bucy,
    neg_log_likelihood_ito,
    neg_log_likelihood_pathwise,
    penalty,
    robust_confidence_interval,
    robust_expectation,
    robust_point_estimate,
    robust_report,
    simulate_pair,
)
from .paths import (
    Partition,
    SampledPath,
    holder_seminorm,
    p_variation,
    path_length_1var,
    running_p_variation,
    variation_sum,
)
from .rough_core import (
    ControlledPath,
    RoughPath,
    brownian_rough_path,
    canonical_lift,
    chen_check,
    controlled_from_functions,
    restrict_rough_path,
    rough_integral,
    rough_integral_path,
    rough_metric,
    solve_rde,
    symmetry_check,
    young_integral,
)
from .signatures import (
    Signature,
    chen_concat,
    signature,
    signature_reversal,
    signature_trajectory,
    time_augment,
)
from .stopping import (
    MCConfig,
    PayoffSpec,
    StoppingPolicy,
    conditional_value,
    conditional_value_linearized,
    mc_value,
    optimize_policy,
    price_american_option,
    randomized_stop_time,
)
from .tensor_algebra import (
    LinearFunctional,
    TruncatedTensor,
    exp_shuffle,
    pair,
    shuffle,
    shuffle_functional,
    tensor_inverse,
    tensor_mul,
)

__version__ = "0.1.0"
