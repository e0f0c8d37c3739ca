//! Fixed-step explicit integrators over array states.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("non-finite derivative component {index} at t = {t}")]
    NonFiniteDerivative { t: f64, index: usize },
    #[error("integration step must be > 0, got {0}")]
    BadStep(f64),
}

fn axpy<const N: usize>(s: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    std::array::from_fn(|i| s[i] + h * k[i])
}

fn checked<const N: usize>(d: [f64; N], t: f64) -> Result<[f64; N], IntegrationError> {
    match d.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(IntegrationError::NonFiniteDerivative { t, index }),
        None => Ok(d),
    }
}

/// Advances `state` by one step of size `dt`.
///
/// `deriv` must capture any inputs by value so they stay constant across the
/// step (zero-order hold). `t` is only used for diagnostics.
pub fn integrate_step<const N: usize, F>(
    mut deriv: F,
    state: [f64; N],
    dt: f64,
    method: Integrator,
    t: f64,
) -> Result<[f64; N], IntegrationError>
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    if !(dt > 0.0) {
        return Err(IntegrationError::BadStep(dt));
    }
    match method {
        Integrator::Euler => {
            let k1 = checked(deriv(&state), t)?;
            Ok(axpy(&state, &k1, dt))
        }
        Integrator::Rk4 => {
            let k1 = checked(deriv(&state), t)?;
            let k2 = checked(deriv(&axpy(&state, &k1, 0.5 * dt)), t)?;
            let k3 = checked(deriv(&axpy(&state, &k2, 0.5 * dt)), t)?;
            let k4 = checked(deriv(&axpy(&state, &k3, dt)), t)?;
            Ok(std::array::from_fn(|i| {
                state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            }))
        }
    }
}
