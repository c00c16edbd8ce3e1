"""Joint design of a base-station precoder and the transmission/reflection
coefficients of a simultaneously transmitting and reflecting surface,
maximizing the weighted sum-rate with gradient-fed sub-networks.

Typical use::

    import numpy as np
    from starbeam import (desk_scenario, generate_channels, desk_train,
                          run_gml)

    sys_cfg, ch_cfg = desk_scenario()
    ch = generate_channels(sys_cfg, ch_cfg, np.random.default_rng(0))
    solution = run_gml(sys_cfg, ch, desk_train(mode="coupled"))
    print(solution.wsr_opt)
"""

from .baselines import conventional_ris_baseline, pga_oracle, random_phase_baseline
from .channels import (
    ChannelConfig,
    channels_from_text,
    channels_to_text,
    dbm_to_watts,
    default_scenario,
    desk_scenario,
    generate_channels,
    load_channels,
    path_loss_linear,
    save_channels,
)
from .constraints import (
    RegulatorConfig,
    apply_phase_delta,
    coupling_residual,
    normalize_amplitudes,
    normalize_power,
    project_coupled_phases,
    regulate_phase_delta,
    wrap_phase,
)
from .errors import ConfigurationError, DegenerateInputError
from .experiments import (
    ExperimentReport,
    ExperimentSpec,
    GradCheckReport,
    TimingResult,
    desk_train,
    grad_check_command,
    paper_train,
    run_experiment,
    run_scheme,
    sign_test_p_value,
    timing_probe,
)
from .gradients import (
    GradientBundle,
    finite_diff_gradient,
    grad_wsr_amplitudes,
    grad_wsr_phases,
    grad_wsr_precoder,
    wsr_gradients,
)
from .model import (
    BeamformingState,
    ChannelSet,
    CoupledAuxiliary,
    SystemConfig,
    all_sinrs,
    evaluate_wsr,
    sinr,
    sinr_augmented,
    star_coefficient_vectors,
    wsr,
)
from .networks import (
    AdamState,
    Mlp,
    adam_init,
    adam_step,
    an_forward,
    init_mlp,
    load_parameters,
    pn_forward,
    save_parameters,
    tn_forward,
)
from .training import (
    MODE_COUPLED,
    MODE_INDEPENDENT,
    PenaltySchedule,
    Solution,
    SubNetworks,
    TrainConfig,
    init_networks,
    inner_update_amplitudes,
    inner_update_phases,
    inner_update_precoder,
    load_networks,
    loss_coupled_tn,
    loss_independent,
    rho_at,
    run_gml,
    run_meta_loop,
    save_networks,
)

__version__ = "0.1.0"
