//! Closed-loop control simulation toolkit.
//!
//! Provides a classical PID, an improved PID with a stabilizing factor, and
//! the EC-PIDUNN controller that schedules PID gains each tick with an
//! untrained random network. Controllers are exercised against Ackermann
//! steering, longitudinal vehicle dynamics with aerodynamic drag, and a
//! pan-tilt mechanism, with step-response metrics and a batch runner that
//! writes CSV traces.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod ec_pidunn;
pub mod experiment;
pub mod integrate;
pub mod metrics;
pub mod network;
pub mod plants;
pub mod sim;

pub use config::{
    parse_config, ConfigError, ControllerKind, ExperimentSpec, ScenarioKind, SimConfig,
};
pub use control::{
    classical_pid_step, dynamic_compute, improved_pid_step, ControlError, ImprovedPidConfig,
    PidGains, PidState,
};
pub use ec_pidunn::{EcPidunnController, ParamVector};
pub use experiment::{run_experiment, ExitStatus};
pub use metrics::{compute_rms_error, compute_step_metrics, ResponseMetrics};
pub use network::MlpNetwork;
pub use sim::{run_pan_tilt_scenario, run_scenario, run_vehicle_scenario, SimError, Trajectory};
