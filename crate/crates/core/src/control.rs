//! Discrete-time PID laws and the gain scheduler that feeds them.
//!
//! Three pieces live here:
//!
//! * [`classical_pid_step`]: `u = kp·e + ki·∫e dt + kd·ė`.
//! * [`improved_pid_step`]: the same law with the integral gain divided by a
//!   stabilizing factor `tau` and the derivative gain multiplied by it, followed
//!   by output saturation.
//! * [`dynamic_compute`]: perturbs baseline gains by `rho_x · Δε / dt` and
//!   clamps the result at zero.
//!
//! The integral is a rectangular accumulation `e·dt` clamped to `±i_max`, and
//! the derivative is a backward difference on the error. The first step of a
//! fresh state uses its own error as the previous error, so the derivative
//! term starts at zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ec_pidunn::ParamVector;

/// Default anti-windup bound on the integral accumulator, in error·s.
pub const DEFAULT_I_MAX: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("invalid controller parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

fn ensure_finite(what: &'static str, value: f64) -> Result<(), ControlError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ControlError::NonFinite { what, value })
    }
}

/// Proportional, integral and derivative gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn is_finite(&self) -> bool {
        self.kp.is_finite() && self.ki.is_finite() && self.kd.is_finite()
    }
}

/// Mutable history carried by one PID loop between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PidState {
    integral_acc: f64,
    prev_error: Option<f64>,
    prev_control: f64,
    dt: f64,
    i_max: f64,
}

impl PidState {
    /// Fresh state with sample period `dt` and anti-windup bound `i_max`.
    ///
    /// `i_max` may be `f64::INFINITY` to disable the clamp.
    pub fn new(dt: f64, i_max: f64) -> Result<Self, ControlError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ControlError::InvalidParameter {
                name: "dt",
                reason: format!("must be finite and > 0, got {dt}"),
            });
        }
        if !(i_max > 0.0) {
            return Err(ControlError::InvalidParameter {
                name: "i_max",
                reason: format!("must be > 0, got {i_max}"),
            });
        }
        Ok(Self {
            integral_acc: 0.0,
            prev_error: None,
            prev_control: 0.0,
            dt,
            i_max,
        })
    }

    /// Overrides the initial `u_{t-1}` seen by the first step.
    pub fn with_initial_control(mut self, u: f64) -> Self {
        self.prev_control = u;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }

    pub fn integral(&self) -> f64 {
        self.integral_acc
    }

    /// Error seen by the last step, `None` before the first step.
    pub fn prev_error(&self) -> Option<f64> {
        self.prev_error
    }

    /// Control value returned by the last step (`u_{t-1}`).
    pub fn prev_control(&self) -> f64 {
        self.prev_control
    }

    /// Integral and derivative signals for `error`, without mutating the state.
    fn terms(&self, error: f64) -> (f64, f64) {
        let integral = (self.integral_acc + error * self.dt).clamp(-self.i_max, self.i_max);
        let prev = self.prev_error.unwrap_or(error);
        (integral, (error - prev) / self.dt)
    }

    fn commit(&mut self, error: f64, integral: f64, control: f64) {
        self.integral_acc = integral;
        self.prev_error = Some(error);
        self.prev_control = control;
    }
}

/// Settings of the improved PID law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovedPidConfig {
    tau: f64,
    i_max: f64,
    u_min: f64,
    u_max: f64,
}

impl ImprovedPidConfig {
    pub fn new(tau: f64, i_max: f64, u_min: f64, u_max: f64) -> Result<Self, ControlError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ControlError::InvalidParameter {
                name: "tau",
                reason: format!("must be finite and > 0, got {tau}"),
            });
        }
        if !(i_max > 0.0) {
            return Err(ControlError::InvalidParameter {
                name: "i_max",
                reason: format!("must be > 0, got {i_max}"),
            });
        }
        if !(u_min < u_max) {
            return Err(ControlError::InvalidParameter {
                name: "u_min/u_max",
                reason: format!("need u_min < u_max, got [{u_min}, {u_max}]"),
            });
        }
        Ok(Self {
            tau,
            i_max,
            u_min,
            u_max,
        })
    }

    /// Unbounded saturation and windup.
    pub fn unbounded(tau: f64) -> Result<Self, ControlError> {
        Self::new(tau, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }

    pub fn limits(&self) -> (f64, f64) {
        (self.u_min, self.u_max)
    }

    /// A fresh [`PidState`] using this configuration's windup bound.
    pub fn new_state(&self, dt: f64) -> Result<PidState, ControlError> {
        PidState::new(dt, self.i_max)
    }
}

/// Individual contributions of one improved-PID evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidTerms {
    pub proportional: f64,
    pub integral: f64,
    pub derivative: f64,
}

impl PidTerms {
    pub fn sum(&self) -> f64 {
        self.proportional + self.integral + self.derivative
    }
}

/// Evaluates the improved PID terms for `error` on `state` without mutating it.
pub fn improved_pid_terms(
    state: &PidState,
    gains: &PidGains,
    tau: f64,
    error: f64,
) -> Result<PidTerms, ControlError> {
    ensure_finite("error", error)?;
    let (integral, derivative) = state.terms(error);
    Ok(PidTerms {
        proportional: gains.kp * error,
        integral: gains.ki / tau * integral,
        derivative: tau * gains.kd * derivative,
    })
}

/// One step of the classical PID law. Updates `state` and returns `u_t`.
pub fn classical_pid_step(
    state: &mut PidState,
    gains: &PidGains,
    error: f64,
) -> Result<f64, ControlError> {
    ensure_finite("error", error)?;
    let (integral, derivative) = state.terms(error);
    let u = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    ensure_finite("control output", u)?;
    state.commit(error, integral, u);
    Ok(u)
}

/// One step of the improved PID law with stabilizing factor `cfg.tau()`.
///
/// Output is saturated to the configured limits before it is stored as
/// `u_{t-1}` for the next step.
pub fn improved_pid_step(
    state: &mut PidState,
    gains: &PidGains,
    cfg: &ImprovedPidConfig,
    error: f64,
) -> Result<f64, ControlError> {
    ensure_finite("error", error)?;
    let (integral, derivative) = state.terms(error);
    let u = gains.kp * error + gains.ki / cfg.tau * integral + cfg.tau * gains.kd * derivative;
    ensure_finite("control output", u)?;
    let u = u.clamp(cfg.u_min, cfg.u_max);
    state.commit(error, integral, u);
    Ok(u)
}

/// Perturbs `baseline` by `rho_x · delta_eps / dt` per gain, clamped at zero.
pub fn dynamic_compute(
    rho: &ParamVector,
    baseline: &PidGains,
    delta_eps: f64,
    dt: f64,
) -> Result<PidGains, ControlError> {
    ensure_finite("delta_eps", delta_eps)?;
    if !(dt > 0.0) {
        return Err(ControlError::InvalidParameter {
            name: "dt",
            reason: format!("must be > 0, got {dt}"),
        });
    }
    for v in rho.as_array() {
        ensure_finite("rho", v)?;
    }
    let rate = delta_eps / dt;
    let gains = PidGains {
        kp: (baseline.kp + rho.p * rate).max(0.0),
        ki: (baseline.ki + rho.i * rate).max(0.0),
        kd: (baseline.kd + rho.d * rate).max(0.0),
    };
    if !gains.is_finite() {
        return Err(ControlError::NonFinite {
            what: "scheduled gain",
            value: gains.kp + gains.ki + gains.kd,
        });
    }
    Ok(gains)
}

/// Fixed-gain classical PID bound to its own state.
#[derive(Debug, Clone)]
pub struct ClassicalPid {
    pub gains: PidGains,
    state: PidState,
}

impl ClassicalPid {
    pub fn new(gains: PidGains, dt: f64, i_max: f64) -> Result<Self, ControlError> {
        Ok(Self {
            gains,
            state: PidState::new(dt, i_max)?,
        })
    }

    pub fn step(&mut self, error: f64) -> Result<f64, ControlError> {
        classical_pid_step(&mut self.state, &self.gains, error)
    }

    pub fn state(&self) -> &PidState {
        &self.state
    }
}
