//! Step-response and tracking metrics over sampled traces.
//!
//! Times are reported relative to the first sample, which is taken as the
//! instant the step is applied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trace is empty")]
    Empty,
    #[error("trace columns have different lengths")]
    Ragged,
    #[error("setpoint equals the initial output ({0}); step span is undefined")]
    ZeroSpan(f64),
}

/// Thresholds used by [`compute_step_metrics`] and [`compute_rms_error`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Lower rise threshold as a fraction of the span.
    pub rise_low: f64,
    /// Upper rise threshold as a fraction of the span.
    pub rise_high: f64,
    /// Half-width of the settling band as a fraction of the span.
    pub settling_band: f64,
    /// Fraction of trailing samples averaged for the steady-state error.
    pub steady_state_window: f64,
    /// Seconds skipped at the start before accumulating the RMS error.
    pub rms_warmup: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            rise_low: 0.1,
            rise_high: 0.9,
            settling_band: 0.02,
            steady_state_window: 0.05,
            rms_warmup: 1.0,
        }
    }
}

/// Metrics for one loop. `None` means the threshold was never reached.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseMetrics {
    pub rise_time: Option<f64>,
    pub settling_time: Option<f64>,
    pub overshoot_pct: Option<f64>,
    pub steady_state_error: Option<f64>,
    pub rms_tracking_error: Option<f64>,
}

fn check(times: &[f64], outputs: &[f64]) -> Result<(), MetricsError> {
    if times.is_empty() {
        return Err(MetricsError::Empty);
    }
    if times.len() != outputs.len() {
        return Err(MetricsError::Ragged);
    }
    Ok(())
}

/// Step metrics with the initial output taken from the first sample.
pub fn compute_step_metrics(
    times: &[f64],
    outputs: &[f64],
    setpoint: f64,
    cfg: &MetricsConfig,
) -> Result<ResponseMetrics, MetricsError> {
    check(times, outputs)?;
    compute_step_metrics_from(times, outputs, outputs[0], setpoint, cfg)
}

/// Step metrics for a step from `initial` to `setpoint` applied at `times[0]`.
///
/// Rise time is the interval between the interpolated low and high threshold
/// crossings. Settling time is the time of the first sample after which every
/// sample stays in the band. Overshoot is measured in the step direction.
pub fn compute_step_metrics_from(
    times: &[f64],
    outputs: &[f64],
    initial: f64,
    setpoint: f64,
    cfg: &MetricsConfig,
) -> Result<ResponseMetrics, MetricsError> {
    check(times, outputs)?;
    let span = setpoint - initial;
    if span == 0.0 {
        return Err(MetricsError::ZeroSpan(initial));
    }
    let t0 = times[0];
    let dir = span.signum();
    let mag = span.abs();
    let progress = |y: f64| dir * (y - initial) / mag;

    let crossing = |level: f64| -> Option<f64> {
        let k = outputs.iter().position(|&y| progress(y) >= level)?;
        if k == 0 {
            return Some(0.0);
        }
        let (p0, p1) = (progress(outputs[k - 1]), progress(outputs[k]));
        let frac = (level - p0) / (p1 - p0);
        Some(times[k - 1] - t0 + frac * (times[k] - times[k - 1]))
    };
    let rise_time = match (crossing(cfg.rise_low), crossing(cfg.rise_high)) {
        (Some(lo), Some(hi)) => Some(hi - lo),
        _ => None,
    };

    let band = cfg.settling_band * mag;
    let settling_time = match outputs.iter().rposition(|&y| (y - setpoint).abs() > band) {
        None => Some(0.0),
        Some(k) if k + 1 < outputs.len() => Some(times[k + 1] - t0),
        Some(_) => None,
    };

    let peak = outputs
        .iter()
        .map(|&y| dir * (y - setpoint))
        .fold(f64::NEG_INFINITY, f64::max);
    let overshoot_pct = (peak / mag * 100.0).max(0.0);

    let n = outputs.len();
    let window = ((cfg.steady_state_window * n as f64).ceil() as usize).clamp(1, n);
    let steady_state_error = outputs[n - window..]
        .iter()
        .map(|y| (setpoint - y).abs())
        .sum::<f64>()
        / window as f64;

    Ok(ResponseMetrics {
        rise_time,
        settling_time,
        overshoot_pct: Some(overshoot_pct),
        steady_state_error: Some(steady_state_error),
        rms_tracking_error: None,
    })
}

/// Root-mean-square of `setpoint − output` over samples at least `warmup`
/// seconds after the first one. `None` when no sample survives the warm-up.
pub fn compute_rms_error(
    times: &[f64],
    setpoints: &[f64],
    outputs: &[f64],
    warmup: f64,
) -> Result<Option<f64>, MetricsError> {
    check(times, outputs)?;
    if setpoints.len() != outputs.len() {
        return Err(MetricsError::Ragged);
    }
    let t0 = times[0];
    let (sum, count) = times
        .iter()
        .zip(setpoints.iter().zip(outputs))
        .filter(|(t, _)| **t - t0 >= warmup)
        .fold((0.0, 0usize), |(s, c), (_, (r, y))| {
            (s + (r - y).powi(2), c + 1)
        });
    Ok((count > 0).then(|| (sum / count as f64).sqrt()))
}
