//! Closed-loop scenario runners.
//!
//! Controllers run at the integration rate. Each tick reads the plant,
//! computes errors and controls, records them, then advances the plant by one
//! step with the controls held constant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    ControllerConfig, ControllerKind, LoopGains, ScenarioKind, SimConfig, SteeringMode,
};
use crate::control::{ClassicalPid, ImprovedPidConfig, PidGains};
use crate::ec_pidunn::{EcPidunnController, EcPidunnError, ParamVector};
use crate::integrate::{integrate_step, IntegrationError};
use crate::network::{MlpNetwork, OutputMap};
use crate::plants::{
    ackermann_derivatives, longitudinal_derivative, pan_tilt_derivatives, pan_tilt_desired_angles,
    AckermannState, LongitudinalState, PanTiltState, StateVector,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("{loop_name} controller failed at t = {t}: {source}")]
    Controller {
        loop_name: &'static str,
        t: f64,
        source: EcPidunnError,
    },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("state diverged at t = {t}: |{component}| = {value:e} exceeds {limit:e}")]
    Diverged {
        t: f64,
        component: String,
        value: f64,
        limit: f64,
    },
}

/// One sample of one control loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub setpoint: f64,
    pub output: f64,
    pub error: f64,
    /// Control applied to the plant, after actuator limits.
    pub control: f64,
    pub gains: PidGains,
    pub rho: ParamVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopTrace {
    pub name: &'static str,
    pub records: Vec<StepRecord>,
}

impl LoopTrace {
    fn new(name: &'static str, capacity: usize) -> Self {
        Self {
            name,
            records: Vec::with_capacity(capacity),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.output).collect()
    }

    pub fn setpoints(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.setpoint).collect()
    }

    pub fn controls(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.control).collect()
    }

    /// The common setpoint if it never changes.
    pub fn constant_setpoint(&self) -> Option<f64> {
        let first = self.records.first()?.setpoint;
        self.records
            .iter()
            .all(|r| r.setpoint == first)
            .then_some(first)
    }
}

/// How a loop controller was built, kept for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerRecord {
    pub loop_name: String,
    pub kind: ControllerKind,
    pub tau: f64,
    pub rho0: ParamVector,
    pub seed: u64,
    pub topology: Vec<usize>,
    pub rho_scale: f64,
    pub baseline: PidGains,
    pub limits: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SimConfig,
    pub loops: Vec<LoopTrace>,
    pub controllers: Vec<ControllerRecord>,
}

impl Trajectory {
    pub fn loop_trace(&self, name: &str) -> Option<&LoopTrace> {
        self.loops.iter().find(|l| l.name == name)
    }
}

struct TickOut {
    control: f64,
    gains: PidGains,
    rho: ParamVector,
}

enum LoopController {
    Classical(ClassicalPid),
    EcPidunn(Box<EcPidunnController>),
}

impl LoopController {
    fn tick(&mut self, error: f64) -> Result<TickOut, EcPidunnError> {
        match self {
            LoopController::Classical(pid) => Ok(TickOut {
                control: pid.step(error)?,
                gains: pid.gains,
                rho: ParamVector::zero(),
            }),
            LoopController::EcPidunn(c) => {
                let t = c.step_traced(error)?;
                Ok(TickOut {
                    control: t.control,
                    gains: t.gains,
                    rho: t.rho,
                })
            }
        }
    }
}

fn build_controller(
    loop_name: &'static str,
    cfg: &ControllerConfig,
    gains: &LoopGains,
    dt: f64,
    limits: (f64, f64),
) -> Result<(LoopController, ControllerRecord), EcPidunnError> {
    let i_max = cfg.i_max.unwrap_or(f64::INFINITY);
    let seed = gains.seed.unwrap_or(cfg.seed);
    let rho_scale = gains.rho_scale.unwrap_or(cfg.rho_scale);
    let record = ControllerRecord {
        loop_name: loop_name.to_string(),
        kind: cfg.kind,
        tau: cfg.tau,
        rho0: cfg.rho0,
        seed,
        topology: cfg.topology.clone(),
        rho_scale,
        baseline: gains.gains(),
        limits,
    };
    let controller = match cfg.kind {
        ControllerKind::Classical => {
            LoopController::Classical(ClassicalPid::new(gains.gains(), dt, i_max)?)
        }
        ControllerKind::EcPidunn => {
            let (lo, hi) = if cfg.saturate {
                limits
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            let pid_cfg = ImprovedPidConfig::new(cfg.tau, i_max, lo, hi)?;
            let net = MlpNetwork::init(
                &cfg.topology,
                seed,
                cfg.activation,
                OutputMap::ScaledTanh(rho_scale),
            )?;
            let c = EcPidunnController::new(net, cfg.rho0, gains.gains(), pid_cfg, dt)?
                .with_delta_mode(cfg.delta_mode)
                .with_initial_control(cfg.initial_control);
            LoopController::EcPidunn(Box::new(c))
        }
    };
    Ok((controller, record))
}

fn check_divergence<const N: usize>(
    names: [&str; N],
    state: &[f64; N],
    t: f64,
    limit: f64,
) -> Result<(), SimError> {
    for (name, &v) in names.iter().zip(state) {
        if !v.is_finite() || v.abs() > limit {
            return Err(SimError::Diverged {
                t,
                component: name.to_string(),
                value: v,
                limit,
            });
        }
    }
    Ok(())
}

fn tick(
    ctrl: &mut LoopController,
    loop_name: &'static str,
    t: f64,
    setpoint: f64,
    output: f64,
    limits: (f64, f64),
) -> Result<StepRecord, SimError> {
    let error = setpoint - output;
    let out = ctrl.tick(error).map_err(|source| SimError::Controller {
        loop_name,
        t,
        source,
    })?;
    Ok(StepRecord {
        t,
        setpoint,
        output,
        error,
        control: out.control.clamp(limits.0, limits.1),
        gains: out.gains,
        rho: out.rho,
    })
}

/// Runs whichever scenario `cfg.scenario.kind` selects.
pub fn run_scenario(cfg: &SimConfig) -> Result<Trajectory, SimError> {
    match cfg.scenario.kind {
        ScenarioKind::Vehicle => run_vehicle_scenario(cfg),
        ScenarioKind::PanTilt => run_pan_tilt_scenario(cfg),
    }
}

/// Speed and steering loops on the coupled longitudinal/Ackermann model.
///
/// The speed loop commands drive force in `[0, f_max]`; the steering loop
/// commands steering rate within the scenario's rate limit. The kinematic
/// model is driven by the live speed.
pub fn run_vehicle_scenario(cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let sc = cfg
        .scenario
        .vehicle
        .as_ref()
        .expect("validated vehicle section");
    let ack = cfg.plant.ackermann;
    let lon = cfg.plant.longitudinal;
    let dt = cfg.sim.dt;
    let n = cfg.sim.steps();

    let force_limits = (0.0, lon.f_max);
    let rate_limits = (-sc.steer_rate_limit, sc.steer_rate_limit);
    let (mut speed_ctrl, speed_rec) = build_controller(
        "speed",
        &cfg.controller,
        &cfg.controller.loops.speed,
        dt,
        force_limits,
    )
    .map_err(|source| SimError::Controller {
        loop_name: "speed",
        t: 0.0,
        source,
    })?;
    let (mut steer_ctrl, steer_rec) = build_controller(
        "steering",
        &cfg.controller,
        &cfg.controller.loops.steering,
        dt,
        rate_limits,
    )
    .map_err(|source| SimError::Controller {
        loop_name: "steering",
        t: 0.0,
        source,
    })?;

    let mut speed = LoopTrace::new("speed", n + 1);
    let mut steering = LoopTrace::new("steering", n + 1);
    let mut car = sc.initial_pose;
    let mut lon_state = LongitudinalState { v_car: sc.v0 };

    for k in 0..=n {
        let t = k as f64 * dt;
        let rec_v = tick(
            &mut speed_ctrl,
            "speed",
            t,
            sc.v_target,
            lon_state.v_car,
            force_limits,
        )?;
        let measured = match sc.steering_mode {
            SteeringMode::Heading => car.theta,
            SteeringMode::SteeringAngle => car.phi,
        };
        let rec_s = tick(
            &mut steer_ctrl,
            "steering",
            t,
            sc.steering_target,
            measured,
            rate_limits,
        )?;
        let (force, steer_rate) = (rec_v.control, rec_s.control);
        speed.records.push(rec_v);
        steering.records.push(rec_s);
        if k == n {
            break;
        }

        let [x, y, theta, phi] = car.to_array();
        let next = integrate_step(
            |s: &[f64; 5]| {
                let car = AckermannState::from_array([s[0], s[1], s[2], s[3]]);
                let v = LongitudinalState { v_car: s[4] };
                let d = ackermann_derivatives(&car, &ack, v.v_car, steer_rate);
                [
                    d.x,
                    d.y,
                    d.theta,
                    d.phi,
                    longitudinal_derivative(&v, &lon, force),
                ]
            },
            [x, y, theta, phi, lon_state.v_car],
            dt,
            cfg.sim.integrator,
            t,
        )?;
        check_divergence(
            ["x", "y", "theta", "phi", "v_car"],
            &next,
            t + dt,
            cfg.sim.divergence_limit,
        )?;
        car = AckermannState::from_array([
            next[0],
            next[1],
            next[2],
            next[3].clamp(-ack.phi_max, ack.phi_max),
        ]);
        lon_state.v_car = next[4];
        debug_assert!(
            lon_state.v_car >= -1e-9,
            "negative speed {}",
            lon_state.v_car
        );
    }

    Ok(Trajectory {
        config: cfg.clone(),
        loops: vec![speed, steering],
        controllers: vec![speed_rec, steer_rec],
    })
}

/// Pan and tilt loops tracking a target moving at fixed depth.
pub fn run_pan_tilt_scenario(cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let sc = cfg
        .scenario
        .pan_tilt
        .as_ref()
        .expect("validated pan_tilt section");
    let params = cfg.plant.pan_tilt;
    let dt = cfg.sim.dt;
    let n = cfg.sim.steps();
    let limits = (-params.torque_limit, params.torque_limit);

    let (mut pan_ctrl, pan_rec) = build_controller(
        "pan",
        &cfg.controller,
        &cfg.controller.loops.pan,
        dt,
        limits,
    )
    .map_err(|source| SimError::Controller {
        loop_name: "pan",
        t: 0.0,
        source,
    })?;
    let (mut tilt_ctrl, tilt_rec) = build_controller(
        "tilt",
        &cfg.controller,
        &cfg.controller.loops.tilt,
        dt,
        limits,
    )
    .map_err(|source| SimError::Controller {
        loop_name: "tilt",
        t: 0.0,
        source,
    })?;

    let mut pan = LoopTrace::new("pan", n + 1);
    let mut tilt = LoopTrace::new("tilt", n + 1);
    let mut state = sc.initial;

    for k in 0..=n {
        let t = k as f64 * dt;
        let (x, y) = sc.trajectory.position(t, sc.depth);
        let (theta_d, phi_d) = pan_tilt_desired_angles(x, y, sc.depth);
        let rec_p = tick(&mut pan_ctrl, "pan", t, theta_d, state.theta, limits)?;
        let rec_t = tick(&mut tilt_ctrl, "tilt", t, phi_d, state.phi, limits)?;
        let (tq_pan, tq_tilt) = (rec_p.control, rec_t.control);
        pan.records.push(rec_p);
        tilt.records.push(rec_t);
        if k == n {
            break;
        }
        let next = integrate_step(
            |s: &[f64; 4]| {
                pan_tilt_derivatives(&PanTiltState::from_array(*s), &params, tq_pan, tq_tilt)
                    .to_array()
            },
            state.to_array(),
            dt,
            cfg.sim.integrator,
            t,
        )?;
        check_divergence(
            ["theta", "theta_dot", "phi", "phi_dot"],
            &next,
            t + dt,
            cfg.sim.divergence_limit,
        )?;
        state = PanTiltState::from_array(next);
    }

    Ok(Trajectory {
        config: cfg.clone(),
        loops: vec![pan, tilt],
        controllers: vec![pan_rec, tilt_rec],
    })
}
