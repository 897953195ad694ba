"""Flexible-coupler array multiuser MIMO simulation library.

Each antenna couples one fixed active dipole to N movable passive dipoles;
repositioning the passive elements reshapes the mutual-impedance-induced
currents (mechanical beamforming).  The package models that electromagnetic
chain, optimizes coupler positions for the MMSE sum rate with a distributed
SCA loop, and estimates the position-dependent effective channels from
structured pilots, centrally (OMP) or distributively (proxy fusion plus
sufficient statistics).
"""

from .geometry import (
    ArrayLayout,
    CouplerPlacement,
    is_feasible,
    linearize_spacing,
    load_placement,
    project_onto_set,
    random_feasible_placement,
    save_placement,
    uniform_placement,
)
from .impedance import (
    DipoleModel,
    ImpedanceBlock,
    build_block,
    build_blocks,
    mutual_impedance,
    sine_cosine_integrals,
)
from .channel import (
    ChannelRealization,
    MultipathSpec,
    sample_channels,
    steering_active,
    steering_coupler,
    user_channel,
)
from .precoding import (
    MechanicalWeights,
    PrecodingState,
    active_only_state,
    all_mech_weights,
    effective_channel,
    fc_state,
    fully_active_rate,
    fully_active_state,
    mech_weights,
    mmse_precoder,
    power_matrix,
    sinr_and_rate,
    transmit_power,
)
from .optimizer import (
    OptimizeResult,
    SCAConfig,
    SCATrace,
    communication_count,
    gradient,
    local_step,
    objective,
    optimize,
    screened_initial_placement,
)
from .chanest import (
    AngularGrid,
    EstimationResult,
    PilotSession,
    build_dictionary,
    centralized_estimate,
    distributed_estimate,
    distributed_gains,
    exhaustive_baseline,
    fuse_and_select,
    local_proxy,
    ls_gains,
    make_pilots,
    make_session,
    nmse,
    omp,
    pilot_correlate,
    reconstruct,
    run_pilot_phase,
    simulate_rx,
)
from .runtime import CostLedger, Message, run_algorithm1, run_algorithm3
from .scenario import Scenario

__version__ = "0.1.0"
