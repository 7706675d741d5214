//! Planar vehicle: linear single-track (bicycle) lateral model and a
//! first-order pedal-to-acceleration longitudinal channel.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::rk4_step;

/// Lowest speed at which the bicycle model is evaluated.
pub const MIN_LATERAL_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg m^2
    pub yaw_inertia: f64,
    /// CG to front axle, m
    pub l_f: f64,
    /// CG to rear axle, m
    pub l_r: f64,
    /// front axle cornering stiffness, N/rad
    pub c_f: f64,
    /// rear axle cornering stiffness, N/rad
    pub c_r: f64,
    /// steering-wheel angle / front-wheel angle
    pub steer_ratio: f64,
    /// (m/s^2) per % pedal
    pub accel_gain: f64,
    /// 1/s
    pub drag: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2600.0,
            l_f: 1.1,
            l_r: 1.6,
            c_f: 80_000.0,
            c_r: 80_000.0,
            steer_ratio: 16.0,
            accel_gain: 0.03,
            drag: 0.005,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("c_f", self.c_f),
            ("c_r", self.c_r),
            ("steer_ratio", self.steer_ratio),
            ("accel_gain", self.accel_gain),
            ("drag", self.drag),
        ];
        for (name, v) in vals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("vehicle.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }

    /// Understeer gradient K_us in rad/(m/s^2), positive for an understeering car.
    pub fn understeer_gradient(&self) -> f64 {
        self.mass * (self.l_r * self.c_r - self.l_f * self.c_f)
            / (self.wheelbase() * self.c_f * self.c_r)
    }

    /// Closed-form steady yaw rate for a constant front-wheel angle.
    pub fn steady_state_yaw_rate(&self, speed: f64, front_angle: f64) -> f64 {
        speed * front_angle / (self.wheelbase() + self.understeer_gradient() * speed * speed)
    }

    /// State matrix and input vector of `d/dt (v_y, r) = A (v_y, r) + B delta_f`.
    pub fn lateral_system(&self, speed: f64) -> (Matrix2<f64>, Vector2<f64>) {
        let (m, iz, a, b, cf, cr, v) = (
            self.mass,
            self.yaw_inertia,
            self.l_f,
            self.l_r,
            self.c_f,
            self.c_r,
            speed,
        );
        let sys = Matrix2::new(
            -(cf + cr) / (m * v),
            (b * cr - a * cf) / (m * v) - v,
            (b * cr - a * cf) / (iz * v),
            -(a * a * cf + b * b * cr) / (iz * v),
        );
        let input = Vector2::new(cf / m, a * cf / iz);
        (sys, input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// yaw, rad
    pub psi: f64,
    /// yaw rate, rad/s
    pub r: f64,
    /// body lateral velocity, m/s
    pub v_y: f64,
    /// longitudinal speed, m/s
    pub speed: f64,
}

impl VehicleState {
    pub fn cruising(speed: f64) -> Self {
        Self {
            speed,
            ..Self::default()
        }
    }
}

fn lateral_rhs(s: &[f64; 5], speed: f64, front_angle: f64, p: &VehicleParams) -> [f64; 5] {
    let [_, _, psi, r, v_y] = *s;
    let alpha_f = front_angle - (v_y + p.l_f * r) / speed;
    let alpha_r = -(v_y - p.l_r * r) / speed;
    let f_f = p.c_f * alpha_f;
    let f_r = p.c_r * alpha_r;
    let (sin, cos) = psi.sin_cos();
    [
        speed * cos - v_y * sin,
        speed * sin + v_y * cos,
        r,
        (p.l_f * f_f - p.l_r * f_r) / p.yaw_inertia,
        (f_f + f_r) / p.mass - speed * r,
    ]
}

/// Advances the lateral states and the planar pose by `dt` at constant speed.
/// `steer_angle` is the steering-wheel angle in rad.
pub fn step_lateral(
    state: &VehicleState,
    steer_angle: f64,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    if !(state.speed > MIN_LATERAL_SPEED) {
        return Err(Error::SpeedTooLow { speed: state.speed });
    }
    let front_angle = steer_angle / params.steer_ratio;
    let x0 = [state.x, state.y, state.psi, state.r, state.v_y];
    let [x, y, psi, r, v_y] = rk4_step(&x0, dt, |s| lateral_rhs(s, state.speed, front_angle, params));
    Ok(VehicleState {
        x,
        y,
        psi,
        r,
        v_y,
        speed: state.speed,
    })
}

/// Advances the speed under `V' = k_a * pedal - c_d * V`; pedal in percent.
pub fn step_longitudinal(
    state: &VehicleState,
    pedal: f64,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    if !pedal.is_finite() {
        return Err(Error::NonFinite {
            channel: "delta_p".into(),
            t: f64::NAN,
        });
    }
    let pedal = pedal.clamp(-100.0, 100.0);
    let [v] = rk4_step(&[state.speed], dt, |v| {
        [params.accel_gain * pedal - params.drag * v[0]]
    });
    Ok(VehicleState {
        speed: v.max(0.0),
        ..*state
    })
}
