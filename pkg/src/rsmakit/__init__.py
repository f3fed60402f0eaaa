"""Rate-splitting multiple access simulation and precoder optimization toolkit."""

__version__ = "0.1.0"

from .model import (
    ConfigError,
    LayoutError,
    PrecoderSolution,
    RateReport,
    Scheme,
    Stream,
    StreamLayout,
    SystemConfig,
    build_stream_layout,
    enumerate_generalized_orders,
    noma_order_from_channel,
    validate_config,
)
from .channels import (
    BoundedError,
    ChannelEnsembleSpec,
    ChannelPair,
    ChannelSampler,
    Jakes,
    Perfect,
    ScaledError,
    deterministic_two_user,
    jakes_correlation,
    sample_jakes_pair,
    sample_rayleigh,
    theta_from_rho,
)
from .rates import (
    SinrTerm,
    allocate_common_rate,
    apply_common_alloc,
    ergodic_rates,
    rate_downlink,
    rate_uplink,
    uplink_sum_capacity,
    worst_case_rates,
)
from .precoders import (
    PowerSplit,
    assemble_solution,
    mbf_common,
    optimize_tau,
    random_common,
    rzf_directions,
    svd_common,
    waterfill_powers,
    zf_directions,
)
from .optimizer import (
    ErgodicSaa,
    OptimizeSpec,
    PerfectCsit,
    SampledWorstCase,
    SolveResult,
    oma_best_wsr,
    solve,
    solve_mmf,
    solve_noma_best,
    sweep_weights,
)
from .analysis import (
    DoFQuery,
    RegionCell,
    classify_operational_region,
    dof_closed_form,
    empirical_dof,
    run_experiment,
)
