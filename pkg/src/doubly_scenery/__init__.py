"""Random walks in doubly random scenery: simulation and limit checks."""
from .config import ExperimentConfig, load_config, preset
from .diagnostics import (
    BnSample,
    ConditionReport,
    bn_values,
    check_cf_condition,
    check_cond_moments,
    check_uniform_integrability,
    compute_Bn,
    enumerate_cf_exact,
)
from .limit import (
    LimitBSample,
    LimitCfEstimate,
    LocalTimeField,
    hurst,
    limit_B_sample,
    limit_cf,
    local_time_field,
)
from .stable import (
    DoaLaw,
    LevyPath,
    ParameterError,
    SimParams,
    StableLaw,
    UnsupportedLawError,
    lambda_bar,
    levy_eval_at,
    model_cf,
    sample_doa,
    sample_sas,
)
from .stats import empirical_cf, hill_tail_index, ks_distance, loglog_slope
from .streams import make_stream
from .walk import (
    AggregateSample,
    OccupationField,
    UserRealization,
    aggregate_users,
    realize_user,
    simulate_aggregate,
    simulate_walk,
)

__version__ = "0.1.0"
