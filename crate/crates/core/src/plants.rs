//! Continuous-time plant models.
//!
//! Each model exposes a pure derivative function over a plain state struct.
//! States convert to and from fixed-size arrays for the integrator.

use serde::{Deserialize, Serialize};

/// Fixed-size vector view of a plant state.
pub trait StateVector<const N: usize>: Copy {
    fn to_array(&self) -> [f64; N];
    fn from_array(a: [f64; N]) -> Self;
}

/// Rear-axle pose plus steering angle of a car-like vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AckermannState {
    pub x: f64,
    pub y: f64,
    /// Heading, unwrapped.
    pub theta: f64,
    /// Steering angle of the virtual centre front wheel.
    pub phi: f64,
}

impl StateVector<4> for AckermannState {
    fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.theta, self.phi]
    }

    fn from_array([x, y, theta, phi]: [f64; 4]) -> Self {
        Self { x, y, theta, phi }
    }
}

impl AckermannState {
    /// Heading wrapped to (−π, π], for reporting only.
    pub fn wrapped_heading(&self) -> f64 {
        wrap_angle(self.theta)
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AckermannParams {
    /// Wheelbase (m).
    pub wheelbase: f64,
    /// Steering angle limit (rad), strictly below π/2.
    pub phi_max: f64,
}

impl Default for AckermannParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            phi_max: 0.6,
        }
    }
}

/// Kinematic Ackermann model.
///
/// `speed` is the forward speed of the rear axle and `steer_rate` the commanded
/// steering rate. The steering rate is zeroed when it would push `phi` past
/// `phi_max`.
pub fn ackermann_derivatives(
    s: &AckermannState,
    p: &AckermannParams,
    speed: f64,
    steer_rate: f64,
) -> AckermannState {
    use std::f64::consts::FRAC_PI_2;
    debug_assert!(
        s.phi.abs() < FRAC_PI_2 - 1e-3,
        "steering angle {} too close to the tan singularity",
        s.phi
    );
    let at_upper = s.phi >= p.phi_max && steer_rate > 0.0;
    let at_lower = s.phi <= -p.phi_max && steer_rate < 0.0;
    let phi_dot = if at_upper || at_lower {
        0.0
    } else {
        steer_rate
    };
    let (sin, cos) = s.theta.sin_cos();
    AckermannState {
        x: speed * cos,
        y: speed * sin,
        theta: speed * s.phi.tan() / p.wheelbase,
        phi: phi_dot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LongitudinalState {
    pub v_car: f64,
}

impl StateVector<1> for LongitudinalState {
    fn to_array(&self) -> [f64; 1] {
        [self.v_car]
    }

    fn from_array([v_car]: [f64; 1]) -> Self {
        Self { v_car }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LongitudinalParams {
    /// Vehicle mass (kg).
    pub mass: f64,
    pub drag_coefficient: f64,
    /// Frontal reference area (m²).
    pub area: f64,
    /// Air density (kg/m³).
    pub air_density: f64,
    /// Maximum drive force (N).
    pub f_max: f64,
}

impl Default for LongitudinalParams {
    fn default() -> Self {
        Self {
            mass: 1200.0,
            drag_coefficient: 0.3,
            area: 2.2,
            air_density: 1.225,
            f_max: 4000.0,
        }
    }
}

impl LongitudinalParams {
    /// `½·C_d·A·ρ_air`, the coefficient of `v²` in the drag force.
    pub fn drag_factor(&self) -> f64 {
        0.5 * self.drag_coefficient * self.area * self.air_density
    }

    pub fn drag_force(&self, v: f64) -> f64 {
        self.drag_factor() * v * v
    }

    /// Speed at which `force` balances drag.
    pub fn terminal_velocity(&self, force: f64) -> f64 {
        (force / self.drag_factor()).sqrt()
    }
}

/// `dv/dt = (F − ½·C_d·A·ρ_air·v²) / m`.
pub fn longitudinal_derivative(s: &LongitudinalState, p: &LongitudinalParams, force: f64) -> f64 {
    (force - p.drag_force(s.v_car)) / p.mass
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PanTiltState {
    pub theta: f64,
    pub theta_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

impl StateVector<4> for PanTiltState {
    fn to_array(&self) -> [f64; 4] {
        [self.theta, self.theta_dot, self.phi, self.phi_dot]
    }

    fn from_array([theta, theta_dot, phi, phi_dot]: [f64; 4]) -> Self {
        Self {
            theta,
            theta_dot,
            phi,
            phi_dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PanTiltParams {
    /// Pan inertia (kg·m²).
    pub inertia_pan: f64,
    /// Tilt inertia (kg·m²).
    pub inertia_tilt: f64,
    /// Pan viscous damping (N·m·s).
    pub damping_pan: f64,
    /// Tilt viscous damping (N·m·s).
    pub damping_tilt: f64,
    /// Symmetric torque limit for both joints (N·m).
    pub torque_limit: f64,
}

impl Default for PanTiltParams {
    fn default() -> Self {
        Self {
            inertia_pan: 0.05,
            inertia_tilt: 0.05,
            damping_pan: 0.1,
            damping_tilt: 0.1,
            torque_limit: 2.0,
        }
    }
}

/// Two decoupled damped rotational joints, `I·ω̇ + b·ω = τ`.
pub fn pan_tilt_derivatives(
    s: &PanTiltState,
    p: &PanTiltParams,
    torque_pan: f64,
    torque_tilt: f64,
) -> PanTiltState {
    PanTiltState {
        theta: s.theta_dot,
        theta_dot: (torque_pan - p.damping_pan * s.theta_dot) / p.inertia_pan,
        phi: s.phi_dot,
        phi_dot: (torque_tilt - p.damping_tilt * s.phi_dot) / p.inertia_tilt,
    }
}

/// Pan and tilt angles that centre a target at lateral offset `(x, y)` and depth `z`.
pub fn pan_tilt_desired_angles(x: f64, y: f64, z: f64) -> (f64, f64) {
    debug_assert!(z > 0.0);
    ((x / z).atan(), (y / z).atan())
}
