"""Worst-case SCNR beamforming for dual-function radar-communication arrays."""

from .arrays import (
    ArrayGeometry,
    response_matrix,
    rx_beampattern,
    rx_steering,
    tx_steering,
)
from .scenario import (
    ChannelSet,
    ClutterConfig,
    ScenarioConfig,
    SolverOptions,
    UserConfig,
    config_sha256,
    dbm_to_watts,
    generate_channels,
    load_config,
    pathloss_db,
    save_config,
    watts_to_dbm,
    with_seed,
)
from .forms import (
    QuadraticFormSet,
    PenaltySurrogate,
    ReceiveBeamformer,
    StackedBeamformer,
    build_forms,
    build_penalty_surrogate,
    penalized_objective,
    psd_sqrt,
    scnr,
    sinr,
    unit_combiner,
    worst_case_scnr,
)
from .solvers import (
    ConvexQcqp,
    Halfspace,
    QuadConstraint,
    level_objective,
    solve_level_program,
    solve_qcqp,
    solve_sinr_power_min,
    solve_spectrahedron_minmax,
)
from .transmit import (
    build_transmit_step,
    optimal_alignment,
    surrogate_affine,
    transmit_inner_loop,
    update_levels,
)
from .receive import (
    FractionalInstance,
    build_fractional,
    dedicated_combiner,
    dinkelbach_solve,
    extract_rank_one,
    min_ratio,
    ratio_values,
    sphere_grid_oracle,
)
from .algorithm import (
    Solution,
    full_power_check,
    initialize_beamformers,
    run_alternating,
)
from .baseline import BaselineTrace, run_baseline
from .presets import fig6, spread_scenario, table1

__version__ = "0.1.0"
