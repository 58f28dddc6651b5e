"""Channel separation and RIS phase design for multi-user uplink MIMO."""

from chansep.channel import (
    ChannelRealization,
    SystemConfig,
    UserDrop,
    drop_users,
    gen_ris_bs_channel,
    gen_user_channels,
    global_channel,
    load_config,
    realize,
    steering_vector,
)
from chansep.metrics import MetricKind, mmse_rate, mse_tot, sum_rate, zf_rate
from chansep.numerics import (
    EigenPair,
    NumericalError,
    RankDeficiencyError,
    general_max_eigenpair,
    hermitian_max_eigenpair,
    rank1_svd,
    reduced_max_eigvec,
    smw_inverse,
)
from chansep.optimizers import (
    OptimizerResult,
    brute_force_discrete,
    closed_form_mse_tot,
    closed_form_sum_rate,
    muiq,
    projected_ascent_baseline,
    random_phases,
)
from chansep.separation import (
    PhaseVector,
    SeparatedChannel,
    separate,
    separated_metric,
    w_of_phases,
)

__version__ = "0.1.0"
