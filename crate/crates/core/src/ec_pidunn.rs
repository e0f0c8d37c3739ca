//! Error-centric PID driven by an untrained network (EC-PIDUNN).
//!
//! Each tick the controller
//!
//! 1. forms `Δε = e_t − u_{t-1}`,
//! 2. concatenates `[e_t, u_{t-1}, Δε]` with the current `ρ` into a 6-vector,
//! 3. replaces `ρ` with the network output for that vector,
//! 4. schedules gains with [`dynamic_compute`] from the new `ρ`,
//! 5. evaluates [`improved_pid_step`] with those gains,
//!
//! and keeps both `ρ` and `u_t` for the next tick.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    dynamic_compute, improved_pid_step, ControlError, ImprovedPidConfig, PidGains, PidState,
};
use crate::network::{MlpNetwork, NetworkError, INPUT_WIDTH};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EcPidunnError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Shaping parameters `[ρ_p, ρ_i, ρ_d]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct ParamVector {
    pub p: f64,
    pub i: f64,
    pub d: f64,
}

impl ParamVector {
    pub const fn new(p: f64, i: f64, d: f64) -> Self {
        Self { p, i, d }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p, self.i, self.d]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

impl From<[f64; 3]> for ParamVector {
    fn from([p, i, d]: [f64; 3]) -> Self {
        Self { p, i, d }
    }
}

impl From<ParamVector> for [f64; 3] {
    fn from(v: ParamVector) -> Self {
        v.as_array()
    }
}

/// How the error difference fed to the network and scheduler is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// `Δε = e_t − u_{t-1}`.
    #[default]
    ErrorMinusControl,
    /// `Δε = e_t − e_{t-1}`, zero on the first tick.
    ErrorDifference,
}

/// Network input for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetInput {
    pub error: f64,
    pub prev_control: f64,
    pub delta_eps: f64,
    pub rho: ParamVector,
}

impl NetInput {
    pub fn flatten(&self) -> [f64; INPUT_WIDTH] {
        [
            self.error,
            self.prev_control,
            self.delta_eps,
            self.rho.p,
            self.rho.i,
            self.rho.d,
        ]
    }
}

/// Everything computed during one controller tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickTrace {
    pub input: NetInput,
    pub rho: ParamVector,
    pub gains: PidGains,
    pub control: f64,
}

#[derive(Debug, Clone)]
pub struct EcPidunnController {
    net: MlpNetwork,
    rho: ParamVector,
    pid_state: PidState,
    baseline: PidGains,
    cfg: ImprovedPidConfig,
    delta_mode: DeltaMode,
}

impl EcPidunnController {
    pub fn new(
        net: MlpNetwork,
        rho0: ParamVector,
        baseline: PidGains,
        cfg: ImprovedPidConfig,
        dt: f64,
    ) -> Result<Self, EcPidunnError> {
        if !rho0.is_finite() {
            return Err(ControlError::NonFinite {
                what: "rho0",
                value: rho0.p + rho0.i + rho0.d,
            }
            .into());
        }
        if !baseline.is_finite() {
            return Err(ControlError::InvalidParameter {
                name: "baseline",
                reason: format!("gains must be finite, got {baseline:?}"),
            }
            .into());
        }
        Ok(Self {
            net,
            rho: rho0,
            pid_state: cfg.new_state(dt)?,
            baseline,
            cfg,
            delta_mode: DeltaMode::default(),
        })
    }

    pub fn with_delta_mode(mut self, mode: DeltaMode) -> Self {
        self.delta_mode = mode;
        self
    }

    /// Sets the initial `u_{t-1}` used by the first tick.
    pub fn with_initial_control(mut self, u: f64) -> Self {
        self.pid_state = self.pid_state.with_initial_control(u);
        self
    }

    pub fn rho(&self) -> ParamVector {
        self.rho
    }

    pub fn baseline(&self) -> PidGains {
        self.baseline
    }

    pub fn config(&self) -> &ImprovedPidConfig {
        &self.cfg
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.net
    }

    pub fn pid_state(&self) -> &PidState {
        &self.pid_state
    }

    pub fn step(&mut self, error: f64) -> Result<f64, EcPidunnError> {
        self.step_traced(error).map(|t| t.control)
    }

    /// Runs one tick and returns every intermediate value.
    pub fn step_traced(&mut self, error: f64) -> Result<TickTrace, EcPidunnError> {
        if !error.is_finite() {
            return Err(ControlError::NonFinite {
                what: "error",
                value: error,
            }
            .into());
        }
        let prev_control = self.pid_state.prev_control();
        let delta_eps = match self.delta_mode {
            DeltaMode::ErrorMinusControl => error - prev_control,
            DeltaMode::ErrorDifference => error - self.pid_state.prev_error().unwrap_or(error),
        };
        let input = NetInput {
            error,
            prev_control,
            delta_eps,
            rho: self.rho,
        };
        let rho = ParamVector::from(self.net.forward(&input.flatten())?);
        let gains = dynamic_compute(&rho, &self.baseline, delta_eps, self.pid_state.dt())?;
        let control = improved_pid_step(&mut self.pid_state, &gains, &self.cfg, error)?;
        self.rho = rho;
        Ok(TickTrace {
            input,
            rho,
            gains,
            control,
        })
    }
}
