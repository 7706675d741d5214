//! Steering wheel: rotational dynamics, self-centering torque, the saturated
//! automation actuator, and the column torque sensor.

use serde::{Deserialize, Serialize};

use crate::arm::Vec2;
use crate::error::{Error, Result};
use crate::sim::rk4_step;

/// Which rate the self-centering damper acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DampingSource {
    /// Actual wheel rate.
    #[default]
    WheelRate,
    /// Rate of the driver's reference angle (literal printed form).
    ReferenceRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WheelParams {
    /// wheel + column inertia, kg m^2
    #[serde(rename = "J_sw")]
    pub inertia: f64,
    /// N m/rad
    #[serde(rename = "K_sw")]
    pub stiffness: f64,
    /// N m s/rad
    #[serde(rename = "C_sw")]
    pub damping: f64,
    /// m
    pub radius: f64,
    /// column rake from vertical, rad; descriptive only, the arm model
    /// carries its own in-plane gravity
    pub rake: f64,
    pub damping_source: DampingSource,
}

impl Default for WheelParams {
    fn default() -> Self {
        Self {
            inertia: 0.04,
            stiffness: 7.5,
            damping: 0.9,
            radius: 0.185,
            rake: 0.4,
            damping_source: DampingSource::WheelRate,
        }
    }
}

impl WheelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inertia.is_finite() && self.inertia > 0.0) {
            return Err(Error::InvalidConfig("J_sw must be positive".into()));
        }
        if !(self.stiffness.is_finite() && self.stiffness >= 0.0 && self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::InvalidConfig("K_sw and C_sw must be non-negative".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidConfig("wheel radius must be positive".into()));
        }
        if !self.rake.is_finite() {
            return Err(Error::InvalidConfig("rake must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdsActuator {
    /// N m/rad
    #[serde(rename = "K_GADS")]
    pub gain: f64,
    /// N m
    #[serde(rename = "T_max")]
    pub max_torque: f64,
    pub enabled: bool,
}

impl Default for AdsActuator {
    fn default() -> Self {
        Self {
            gain: 72.7,
            max_torque: 5.0,
            enabled: true,
        }
    }
}

impl AdsActuator {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_torque.is_finite() && self.max_torque > 0.0) {
            return Err(Error::InvalidConfig("T_max must be positive".into()));
        }
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(Error::InvalidConfig("K_GADS must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelState {
    pub angle: f64,
    pub rate: f64,
}

/// Actuator torque `-K_GADS (delta - delta_ref)` saturated at `+-T_max`.
pub fn ads_torque(wheel_angle: f64, ads_ref: f64, act: &AdsActuator) -> f64 {
    if !act.enabled {
        return 0.0;
    }
    (-act.gain * (wheel_angle - ads_ref)).clamp(-act.max_torque, act.max_torque)
}

/// Restoring torque `K_sw delta + C_sw rate`; it enters the wheel balance with
/// a minus sign. `ref_rate` is only used with [`DampingSource::ReferenceRate`].
pub fn self_align_torque(wheel_angle: f64, wheel_rate: f64, ref_rate: f64, p: &WheelParams) -> f64 {
    let rate = match p.damping_source {
        DampingSource::WheelRate => wheel_rate,
        DampingSource::ReferenceRate => ref_rate,
    };
    p.stiffness * wheel_angle + p.damping * rate
}

/// `J_sw delta'' = T_hands + T_ADS - T_sw`.
pub fn wheel_accel(t_hands: f64, t_ads: f64, t_sw: f64, p: &WheelParams) -> f64 {
    (t_hands + t_ads - t_sw) / p.inertia
}

/// One RK4 step with hand and actuator torques held constant.
pub fn wheel_dynamics(
    state: &WheelState,
    t_hands: f64,
    t_ads: f64,
    ref_rate: f64,
    p: &WheelParams,
    dt: f64,
) -> WheelState {
    let [angle, rate] = rk4_step(&[state.angle, state.rate], dt, |x| {
        let t_sw = self_align_torque(x[0], x[1], ref_rate, p);
        [x[1], wheel_accel(t_hands, t_ads, t_sw, p)]
    });
    WheelState { angle, rate }
}

/// Net torque the hands apply about the column axis. `forces` are the forces
/// each hand applies to the rim at the matching `points` (hub-relative).
pub fn column_sensor(forces: &[Vec2; 2], points: &[Vec2; 2]) -> f64 {
    forces
        .iter()
        .zip(points)
        .map(|(f, p)| p.x * f.y - p.y * f.x)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ads_law_and_saturation() {
        let act = AdsActuator::default();
        assert_eq!(ads_torque(0.3, 0.3, &act), 0.0);
        assert!((ads_torque(0.01, 0.0, &act) + 0.727).abs() < 1e-12);
        assert_eq!(ads_torque(0.2, 0.0, &act), -5.0);
        assert_eq!(ads_torque(-0.2, 0.0, &act), 5.0);
        let off = AdsActuator {
            enabled: false,
            ..act
        };
        assert_eq!(ads_torque(0.2, 0.0, &off), 0.0);
    }

    #[test]
    fn self_align_examples() {
        let p = WheelParams::default();
        assert!((self_align_torque(0.1, 0.0, 0.0, &p) - 0.75).abs() < 1e-12);
        assert!((self_align_torque(0.0, 1.0, 0.0, &p) - 0.9).abs() < 1e-12);
        assert_eq!(self_align_torque(0.0, 0.0, 0.0, &p), 0.0);
        let literal = WheelParams {
            damping_source: DampingSource::ReferenceRate,
            ..p
        };
        assert!((self_align_torque(0.0, 1.0, 2.0, &literal) - 1.8).abs() < 1e-12);
    }

    #[test]
    fn wheel_equilibrium_and_steady_state() {
        let p = WheelParams::default();
        let s = WheelState::default();
        assert_eq!(wheel_dynamics(&s, 0.0, 0.0, 0.0, &p, 1e-3), s);

        let mut s = WheelState::default();
        for _ in 0..20_000 {
            s = wheel_dynamics(&s, 0.0, 1.0, 0.0, &p, 1e-3);
        }
        assert!((s.angle - 1.0 / 7.5).abs() < 1e-6);
    }

    #[test]
    fn contested_torque() {
        let p = WheelParams::default();
        let mut s = WheelState::default();
        for _ in 0..1000 {
            s = wheel_dynamics(&s, -3.0, 3.0, 0.0, &p, 1e-3);
        }
        assert_eq!(s, WheelState::default());
        let pts = [Vec2::new(-p.radius, 0.0), Vec2::new(p.radius, 0.0)];
        let forces = [Vec2::new(0.0, 3.0 / (2.0 * p.radius)), Vec2::new(0.0, -3.0 / (2.0 * p.radius))];
        assert!((column_sensor(&forces, &pts) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn sensor_lever_arm() {
        let pts = [Vec2::new(-0.185, 0.0), Vec2::new(0.185, 0.0)];
        assert_eq!(column_sensor(&[Vec2::zeros(); 2], &pts), 0.0);
        let f = [Vec2::zeros(), Vec2::new(0.0, 10.0)];
        assert!((column_sensor(&f, &pts) - 1.85).abs() < 1e-12);
    }

    #[test]
    fn free_wheel_returns_to_center() {
        let p = WheelParams::default();
        let mut s = WheelState { angle: 0.5, rate: 0.0 };
        let mut peak_late = 0.0f64;
        for k in 0..20_000 {
            s = wheel_dynamics(&s, 0.0, 0.0, 0.0, &p, 1e-3);
            if k > 15_000 {
                peak_late = peak_late.max(s.angle.abs());
            }
        }
        assert!(peak_late < 1e-3, "{peak_late}");
    }
}
