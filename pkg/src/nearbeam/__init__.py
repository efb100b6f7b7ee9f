"""Near-field sensing-assisted predictive beamforming toolkit.

Synthesizes spherical-wavefront monostatic echoes for a moving target,
estimates the mobility state (angle, distance, radial and transverse
velocity) by maximum likelihood, tracks it with an extended Kalman
filter, and focuses Doppler-compensated downlink beams on the predicted
position. Cramer-Rao bounds quantify the attainable accuracy across the
near-field region.
"""

from .beamformer import (
    BeamPlan,
    CommMetrics,
    comm_metrics,
    doppler_ramps,
    element_range_rates,
    focus_weights,
)
from .config import (
    ConfigError,
    ScenarioConfig,
    build_scenario,
    load_config,
    parse_config_text,
)
from .crb import CrbReport, crb_report, fim, rcrb_sweep
from .echo import (
    EchoFrame,
    LinkBudget,
    add_noise,
    dbm_to_watts,
    noiseless_echo,
    random_probe,
    reflection_coefficient,
)
from .estimator import (
    DegenerateSignatureError,
    EstimateReport,
    SearchWindow,
    concentrated_objective,
    grid_then_refine,
    initial_access_search,
    signature,
)
from .harness import (
    RunRecord,
    RuntimeFailure,
    run_crb_sweep,
    run_estimate_once,
    run_mc_rmse,
    run_nfpb,
    substream,
)
from .geometry import (
    SPEED_OF_LIGHT,
    ArrayConfig,
    PolarLocation,
    element_positions,
    element_target_distance,
    farfield_steering,
    nearfield_steering,
    rayleigh_distance,
)
from .kinematics import (
    CircularArc,
    CpiClock,
    Spiral,
    StraightLine,
    TargetState,
    Trajectory,
    WaypointSequence,
    cartesian_to_state,
    kinematic_step,
    linear_states,
    sample_trajectory,
    state_at,
    velocity_to_cartesian,
)
from .tracker import (
    NoiseModel,
    TrackLostError,
    TrackState,
    TrackingOptions,
    build_window,
    gate_threshold,
    kinematic_jacobian,
    predict,
    process_noise,
    track_cpi,
    update,
    wrap_angle,
)

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT",
    "ArrayConfig",
    "BeamPlan",
    "CircularArc",
    "CommMetrics",
    "ConfigError",
    "CpiClock",
    "CrbReport",
    "DegenerateSignatureError",
    "EchoFrame",
    "EstimateReport",
    "LinkBudget",
    "NoiseModel",
    "PolarLocation",
    "RunRecord",
    "RuntimeFailure",
    "ScenarioConfig",
    "SearchWindow",
    "Spiral",
    "StraightLine",
    "TargetState",
    "TrackLostError",
    "TrackState",
    "TrackingOptions",
    "Trajectory",
    "WaypointSequence",
    "add_noise",
    "build_scenario",
    "build_window",
    "cartesian_to_state",
    "comm_metrics",
    "concentrated_objective",
    "crb_report",
    "dbm_to_watts",
    "load_config",
    "parse_config_text",
    "run_crb_sweep",
    "run_estimate_once",
    "run_mc_rmse",
    "run_nfpb",
    "substream",
    "doppler_ramps",
    "element_positions",
    "element_range_rates",
    "element_target_distance",
    "farfield_steering",
    "fim",
    "focus_weights",
    "gate_threshold",
    "grid_then_refine",
    "initial_access_search",
    "kinematic_jacobian",
    "kinematic_step",
    "linear_states",
    "nearfield_steering",
    "noiseless_echo",
    "predict",
    "process_noise",
    "random_probe",
    "rayleigh_distance",
    "rcrb_sweep",
    "reflection_coefficient",
    "sample_trajectory",
    "signature",
    "state_at",
    "track_cpi",
    "update",
    "velocity_to_cartesian",
    "wrap_angle",
    "__version__",
]
