//! Experiment configuration: schema, defaults, validation and run enumeration.
//!
//! A config is one JSON document with the sections `scenario`, `controller`,
//! `plant`, `sim`, `sweep` and `output`. Every section except `scenario` may
//! be omitted. Unknown keys anywhere are errors.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{PidGains, DEFAULT_I_MAX};
use crate::ec_pidunn::{DeltaMode, ParamVector};
use crate::integrate::Integrator;
use crate::metrics::MetricsConfig;
use crate::network::{Activation, INPUT_WIDTH, OUTPUT_WIDTH};
use crate::plants::{
    AckermannParams, AckermannState, LongitudinalParams, PanTiltParams, PanTiltState,
};

/// A rejected config, with the dotted key path that caused it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Vehicle,
    PanTilt,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Classical,
    #[default]
    EcPidunn,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Vehicle => "vehicle",
            ScenarioKind::PanTilt => "pan_tilt",
        }
    }
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Classical => "classical",
            ControllerKind::EcPidunn => "ec_pidunn",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which vehicle variable the steering loop regulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringMode {
    /// Heading `theta`, through the full kinematic model.
    #[default]
    Heading,
    /// Steering angle `phi`, a pure integrator of the steering rate.
    SteeringAngle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleScenario {
    /// Target forward speed (m/s).
    pub v_target: f64,
    /// Target heading or steering angle (rad), depending on `steering_mode`.
    pub steering_target: f64,
    #[serde(default)]
    pub steering_mode: SteeringMode,
    /// Initial forward speed (m/s).
    #[serde(default)]
    pub v0: f64,
    #[serde(default)]
    pub initial_pose: AckermannState,
    /// Symmetric steering-rate actuator limit (rad/s).
    #[serde(default = "default_steer_rate_limit")]
    pub steer_rate_limit: f64,
}

fn default_steer_rate_limit() -> f64 {
    1.0
}

/// Target motion in the plane at fixed depth from the camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetTrajectory {
    /// Target sits at `(x, y)` from t = 0.
    Step { x: f64, y: f64 },
    /// `x = R·sin(ωt)`, `y = R·cos(ωt)`; `radius` defaults to the depth.
    Sinusoid {
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default = "default_omega")]
        omega: f64,
    },
    /// `(x0 + vx·t, y0 + vy·t)`.
    Line { x0: f64, y0: f64, vx: f64, vy: f64 },
}

fn default_omega() -> f64 {
    0.5
}

impl Default for TargetTrajectory {
    fn default() -> Self {
        TargetTrajectory::Sinusoid {
            radius: None,
            omega: default_omega(),
        }
    }
}

impl TargetTrajectory {
    /// Target position at time `t` for a camera at `depth`.
    pub fn position(&self, t: f64, depth: f64) -> (f64, f64) {
        match *self {
            TargetTrajectory::Step { x, y } => (x, y),
            TargetTrajectory::Sinusoid { radius, omega } => {
                let r = radius.unwrap_or(depth);
                let (s, c) = (omega * t).sin_cos();
                (r * s, r * c)
            }
            TargetTrajectory::Line { x0, y0, vx, vy } => (x0 + vx * t, y0 + vy * t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanTiltScenario {
    /// Fixed distance from the camera to the target plane (m).
    #[serde(default = "default_depth")]
    pub depth: f64,
    #[serde(default)]
    pub trajectory: TargetTrajectory,
    #[serde(default)]
    pub initial: PanTiltState,
}

fn default_depth() -> f64 {
    2.0
}

impl Default for PanTiltScenario {
    fn default() -> Self {
        Self {
            depth: default_depth(),
            trajectory: TargetTrajectory::default(),
            initial: PanTiltState::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pan_tilt: Option<PanTiltScenario>,
}

/// Baseline gains of one loop plus optional per-loop network overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LoopGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            rho_scale: None,
            seed: None,
        }
    }

    pub fn gains(&self) -> PidGains {
        PidGains::new(self.kp, self.ki, self.kd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopGainsConfig {
    pub speed: LoopGains,
    pub steering: LoopGains,
    pub pan: LoopGains,
    pub tilt: LoopGains,
}

impl Default for LoopGainsConfig {
    fn default() -> Self {
        Self {
            speed: LoopGains::new(1500.0, 1000.0, 0.0),
            steering: LoopGains::new(4.0, 0.5, 0.2),
            pan: LoopGains::new(20.0, 20.0, 0.1),
            tilt: LoopGains::new(20.0, 20.0, 0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Stabilizing factor shared by every loop.
    pub tau: f64,
    /// Initial shaping vector shared by every loop.
    pub rho0: ParamVector,
    pub seed: u64,
    /// Layer widths including input (6) and output (3).
    pub topology: Vec<usize>,
    pub activation: Activation,
    /// Output bound of the network; per-loop `rho_scale` overrides it.
    pub rho_scale: f64,
    pub delta_mode: DeltaMode,
    /// Anti-windup bound; `null` disables it.
    pub i_max: Option<f64>,
    /// Saturate the improved-PID output at the actuator limits.
    pub saturate: bool,
    /// `u_{t-1}` seen by the first tick.
    pub initial_control: f64,
    pub loops: LoopGainsConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kind: ControllerKind::default(),
            tau: 1.0,
            rho0: ParamVector::zero(),
            seed: 42,
            topology: vec![INPUT_WIDTH, 16, 16, OUTPUT_WIDTH],
            activation: Activation::Tanh,
            rho_scale: 0.1,
            delta_mode: DeltaMode::default(),
            i_max: Some(DEFAULT_I_MAX),
            saturate: true,
            initial_control: 0.0,
            loops: LoopGainsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub ackermann: AckermannParams,
    pub longitudinal: LongitudinalParams,
    pub pan_tilt: PanTiltParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub dt: f64,
    pub duration: f64,
    pub integrator: Integrator,
    /// Any state component beyond this magnitude aborts the run.
    pub divergence_limit: f64,
    pub metrics: MetricsConfig,
}

/// Upper bound on samples per loop.
pub const MAX_STEPS: f64 = 5e7;

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 20.0,
            integrator: Integrator::Rk4,
            divergence_limit: 1e9,
            metrics: MetricsConfig::default(),
        }
    }
}

impl SimSettings {
    /// Number of integration steps; a run records one more sample than this.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }
}

/// Sweep axes. An absent axis falls back to the single value in `controller`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controllers: Option<Vec<ControllerKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub report: ReportFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
            report: ReportFormat::Csv,
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub controller: ControllerConfig,
    pub plant: PlantConfig,
    pub sim: SimSettings,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_run(&self.scenario, &self.controller, &self.plant, &self.sim)
    }
}

/// One enumerated run of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub id: String,
    pub config: SimConfig,
}

impl RunSpec {
    pub fn controller(&self) -> ControllerKind {
        self.config.controller.kind
    }

    pub fn tau(&self) -> f64 {
        self.config.controller.tau
    }

    pub fn seed(&self) -> u64 {
        self.config.controller.seed
    }
}

/// Parses and validates a JSON config document.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ExperimentSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(path, e.into_inner().to_string())
    })?;
    spec.validate()?;
    Ok(spec)
}

impl ExperimentSpec {
    /// Serializes the resolved spec, defaults included.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_run(&self.scenario, &self.controller, &self.plant, &self.sim)?;
        if let Some(c) = &self.sweep.controllers {
            if c.is_empty() {
                return Err(ConfigError::new("sweep.controllers", "declared but empty"));
            }
        }
        if let Some(taus) = &self.sweep.tau {
            if taus.is_empty() {
                return Err(ConfigError::new("sweep.tau", "declared but empty"));
            }
            for (i, &t) in taus.iter().enumerate() {
                positive(&format!("sweep.tau[{i}]"), t)?;
            }
        }
        if let Some(s) = &self.sweep.seeds {
            if s.is_empty() {
                return Err(ConfigError::new("sweep.seeds", "declared but empty"));
            }
        }
        Ok(())
    }

    /// Replaces the comparison set with a single controller.
    pub fn override_controller(&mut self, kind: ControllerKind) {
        self.controller.kind = kind;
        self.sweep.controllers = None;
    }

    /// Replaces the seed axis with a single seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.controller.seed = seed;
        self.sweep.seeds = None;
    }

    pub fn override_scenario(&mut self, kind: ScenarioKind) {
        self.scenario.kind = kind;
    }

    /// Enumerates runs in lexicographic order of (controller, τ, seed).
    ///
    /// The classical controller ignores τ and the network seed, so it is run
    /// once regardless of those axes.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut controllers = self
            .sweep
            .controllers
            .clone()
            .unwrap_or_else(|| vec![self.controller.kind]);
        controllers.sort();
        controllers.dedup();
        let mut taus = self
            .sweep
            .tau
            .clone()
            .unwrap_or_else(|| vec![self.controller.tau]);
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        let mut seeds = self
            .sweep
            .seeds
            .clone()
            .unwrap_or_else(|| vec![self.controller.seed]);
        seeds.sort_unstable();
        seeds.dedup();

        let mut runs = Vec::new();
        for kind in controllers {
            let grid: Vec<(f64, u64)> = match kind {
                ControllerKind::Classical => vec![(self.controller.tau, self.controller.seed)],
                ControllerKind::EcPidunn => taus
                    .iter()
                    .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
                    .collect(),
            };
            for (tau, seed) in grid {
                let mut controller = self.controller.clone();
                controller.kind = kind;
                controller.tau = tau;
                controller.seed = seed;
                let id = match kind {
                    ControllerKind::Classical => format!("{:03}_classical", runs.len()),
                    ControllerKind::EcPidunn => {
                        format!("{:03}_ec_pidunn_tau{}_seed{}", runs.len(), tau, seed)
                    }
                };
                runs.push(RunSpec {
                    id,
                    config: SimConfig {
                        scenario: self.scenario.clone(),
                        controller,
                        plant: self.plant.clone(),
                        sim: self.sim.clone(),
                    },
                });
            }
        }
        runs
    }
}

fn finite(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be finite, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be > 0, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be >= 0, got {v}")))
    }
}

fn validate_loop(path: &str, g: &LoopGains) -> Result<(), ConfigError> {
    finite(&format!("{path}.kp"), g.kp)?;
    finite(&format!("{path}.ki"), g.ki)?;
    finite(&format!("{path}.kd"), g.kd)?;
    if let Some(s) = g.rho_scale {
        non_negative(&format!("{path}.rho_scale"), s)?;
    }
    Ok(())
}

fn validate_run(
    scenario: &ScenarioConfig,
    controller: &ControllerConfig,
    plant: &PlantConfig,
    sim: &SimSettings,
) -> Result<(), ConfigError> {
    positive("sim.dt", sim.dt)?;
    positive("sim.duration", sim.duration)?;
    if sim.dt > sim.duration {
        return Err(ConfigError::new("sim.dt", "must not exceed sim.duration"));
    }
    if sim.duration / sim.dt > MAX_STEPS {
        return Err(ConfigError::new(
            "sim.duration",
            format!("duration/dt exceeds the record limit of {MAX_STEPS} samples"),
        ));
    }
    positive("sim.divergence_limit", sim.divergence_limit)?;
    let m = &sim.metrics;
    if !(0.0 <= m.rise_low && m.rise_low < m.rise_high && m.rise_high <= 1.0) {
        return Err(ConfigError::new(
            "sim.metrics.rise_low",
            "need 0 <= rise_low < rise_high <= 1",
        ));
    }
    positive("sim.metrics.settling_band", m.settling_band)?;
    if !(m.steady_state_window > 0.0 && m.steady_state_window <= 1.0) {
        return Err(ConfigError::new(
            "sim.metrics.steady_state_window",
            "must be in (0, 1]",
        ));
    }
    non_negative("sim.metrics.rms_warmup", m.rms_warmup)?;

    positive("controller.tau", controller.tau)?;
    for (i, v) in controller.rho0.as_array().iter().enumerate() {
        finite(&format!("controller.rho0[{i}]"), *v)?;
    }
    let topo = &controller.topology;
    if topo.len() < 2
        || topo[0] != INPUT_WIDTH
        || topo[topo.len() - 1] != OUTPUT_WIDTH
        || topo.contains(&0)
    {
        return Err(ConfigError::new(
            "controller.topology",
            format!("must start at {INPUT_WIDTH}, end at {OUTPUT_WIDTH} and have no empty layer, got {topo:?}"),
        ));
    }
    non_negative("controller.rho_scale", controller.rho_scale)?;
    if let Some(i_max) = controller.i_max {
        positive("controller.i_max", i_max)?;
    }
    finite("controller.initial_control", controller.initial_control)?;
    validate_loop("controller.loops.speed", &controller.loops.speed)?;
    validate_loop("controller.loops.steering", &controller.loops.steering)?;
    validate_loop("controller.loops.pan", &controller.loops.pan)?;
    validate_loop("controller.loops.tilt", &controller.loops.tilt)?;

    let a = &plant.ackermann;
    positive("plant.ackermann.wheelbase", a.wheelbase)?;
    if !(a.phi_max > 0.0 && a.phi_max < std::f64::consts::FRAC_PI_2 - 1e-3) {
        return Err(ConfigError::new(
            "plant.ackermann.phi_max",
            format!("must be in (0, pi/2 - 1e-3), got {}", a.phi_max),
        ));
    }
    let l = &plant.longitudinal;
    positive("plant.longitudinal.mass", l.mass)?;
    non_negative("plant.longitudinal.drag_coefficient", l.drag_coefficient)?;
    non_negative("plant.longitudinal.area", l.area)?;
    non_negative("plant.longitudinal.air_density", l.air_density)?;
    positive("plant.longitudinal.f_max", l.f_max)?;
    let p = &plant.pan_tilt;
    positive("plant.pan_tilt.inertia_pan", p.inertia_pan)?;
    positive("plant.pan_tilt.inertia_tilt", p.inertia_tilt)?;
    non_negative("plant.pan_tilt.damping_pan", p.damping_pan)?;
    non_negative("plant.pan_tilt.damping_tilt", p.damping_tilt)?;
    positive("plant.pan_tilt.torque_limit", p.torque_limit)?;

    match scenario.kind {
        ScenarioKind::Vehicle => {
            let v = scenario.vehicle.as_ref().ok_or_else(|| {
                ConfigError::new(
                    "scenario.vehicle",
                    "missing section for scenario kind vehicle",
                )
            })?;
            finite("scenario.vehicle.v_target", v.v_target)?;
            finite("scenario.vehicle.steering_target", v.steering_target)?;
            non_negative("scenario.vehicle.v0", v.v0)?;
            positive("scenario.vehicle.steer_rate_limit", v.steer_rate_limit)?;
            let pose = v.initial_pose;
            for (name, val) in [
                ("x", pose.x),
                ("y", pose.y),
                ("theta", pose.theta),
                ("phi", pose.phi),
            ] {
                finite(&format!("scenario.vehicle.initial_pose.{name}"), val)?;
            }
            if pose.phi.abs() > a.phi_max {
                return Err(ConfigError::new(
                    "scenario.vehicle.initial_pose.phi",
                    "exceeds plant.ackermann.phi_max",
                ));
            }
        }
        ScenarioKind::PanTilt => {
            let pt = scenario.pan_tilt.as_ref().ok_or_else(|| {
                ConfigError::new(
                    "scenario.pan_tilt",
                    "missing section for scenario kind pan_tilt",
                )
            })?;
            positive("scenario.pan_tilt.depth", pt.depth)?;
            match pt.trajectory {
                TargetTrajectory::Step { x, y } => {
                    finite("scenario.pan_tilt.trajectory.x", x)?;
                    finite("scenario.pan_tilt.trajectory.y", y)?;
                }
                TargetTrajectory::Sinusoid { radius, omega } => {
                    if let Some(r) = radius {
                        finite("scenario.pan_tilt.trajectory.radius", r)?;
                    }
                    finite("scenario.pan_tilt.trajectory.omega", omega)?;
                }
                TargetTrajectory::Line { x0, y0, vx, vy } => {
                    for (name, val) in [("x0", x0), ("y0", y0), ("vx", vx), ("vy", vy)] {
                        finite(&format!("scenario.pan_tilt.trajectory.{name}"), val)?;
                    }
                }
            }
        }
    }
    Ok(())
}
