//! Driver arms: two planar two-link arms in the steering-wheel plane, holding
//! the rim at the 9 and 3 o'clock positions through spring-damper couplings.
//!
//! Joint order is `[left shoulder, left elbow, right shoulder, right elbow]`.
//! Shoulder angles are absolute (from the arm's local +x axis), elbow angles
//! are relative to the upper arm. The left arm is described in a frame
//! mirrored about the wheel's vertical axis, so mirrored targets give equal
//! joint angles and both elbows bend outboard for `q_e` in `(0, pi)`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

pub const LEFT_SHOULDER: usize = 0;
pub const LEFT_ELBOW: usize = 1;
pub const RIGHT_SHOULDER: usize = 2;
pub const RIGHT_ELBOW: usize = 3;

pub const JOINT_NAMES: [&str; 4] = ["left_shoulder", "left_elbow", "right_shoulder", "right_elbow"];

/// Static right-shoulder torque the gravity calibration targets, N m.
pub const GRAVITY_HOLD_TARGET: f64 = 9.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    fn mirror(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    /// Offset of this arm's joints in the 4-vector.
    pub fn offset(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 2,
        }
    }

    fn index(self) -> usize {
        self.offset() / 2
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Segment and posture parameters. Defaults follow standard body-segment
/// fractions for a 1.8 m, 77.4 kg adult; `g_eff` is the in-plane gravity that
/// reproduces the calibrated right-shoulder hold torque at the straight-ahead
/// posture (see [`ArmParams::calibrated_gravity`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmParams {
    pub upper_arm_length: f64,
    pub forearm_length: f64,
    pub upper_arm_mass: f64,
    pub forearm_mass: f64,
    /// about the segment centre of mass, kg m^2
    pub upper_arm_inertia: f64,
    pub forearm_inertia: f64,
    /// centre of mass distance from the proximal joint, m
    pub upper_arm_com: f64,
    pub forearm_com: f64,
    /// wheel-plane coordinates relative to the hub, m
    pub left_shoulder: [f64; 2],
    pub right_shoulder: [f64; 2],
    /// in-plane gravity, m/s^2, acting along -y
    pub g_eff: f64,
    /// one-sided elbow limit stiffness, N m/rad
    pub elbow_limit_stiffness: f64,
    /// elbow limits sit this far inside (0, pi), rad
    pub elbow_limit_margin: f64,
}

impl Default for ArmParams {
    fn default() -> Self {
        let upper_arm_length = 0.31;
        let forearm_length = 0.27;
        let upper_arm_mass = 2.1;
        let forearm_mass = 1.7;
        Self {
            upper_arm_length,
            forearm_length,
            upper_arm_mass,
            forearm_mass,
            upper_arm_inertia: upper_arm_mass * (0.322 * upper_arm_length).powi(2),
            forearm_inertia: forearm_mass * (0.30 * forearm_length).powi(2),
            upper_arm_com: 0.436 * upper_arm_length,
            forearm_com: 0.12,
            left_shoulder: [-0.10, -0.28],
            right_shoulder: [0.10, -0.28],
            g_eff: DEFAULT_G_EFF,
            elbow_limit_stiffness: 50.0,
            elbow_limit_margin: 0.05,
        }
    }
}

/// Result of [`ArmParams::calibrated_gravity`] for the default geometry and a
/// 0.185 m wheel.
pub const DEFAULT_G_EFF: f64 = 15.507_481_763_534_13;

impl ArmParams {
    pub fn validate(&self, wheel_radius: f64) -> Result<()> {
        let positive = [
            ("upper_arm_length", self.upper_arm_length),
            ("forearm_length", self.forearm_length),
            ("upper_arm_mass", self.upper_arm_mass),
            ("forearm_mass", self.forearm_mass),
            ("upper_arm_inertia", self.upper_arm_inertia),
            ("forearm_inertia", self.forearm_inertia),
            ("upper_arm_com", self.upper_arm_com),
            ("forearm_com", self.forearm_com),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("arm.{name} must be positive, got {v}")));
            }
        }
        if !(self.g_eff.is_finite() && self.g_eff >= 0.0) {
            return Err(Error::InvalidConfig("arm.g_eff must be >= 0".into()));
        }
        if !(self.elbow_limit_stiffness >= 0.0 && (0.0..PI / 2.0).contains(&self.elbow_limit_margin)) {
            return Err(Error::InvalidConfig("arm elbow limit parameters out of range".into()));
        }
        let reach = self.upper_arm_length + self.forearm_length;
        let fold = (self.upper_arm_length - self.forearm_length).abs();
        for side in Side::BOTH {
            let s = self.shoulder(side);
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::InvalidConfig("shoulder anchors must be finite".into()));
            }
            let (near, far) = ((s.norm() - wheel_radius).abs(), s.norm() + wheel_radius);
            if far >= reach || near <= fold {
                return Err(Error::InvalidConfig(format!(
                    "{} grip not reachable for every wheel angle (distance range {near:.3}..{far:.3} m, arm range {fold:.3}..{reach:.3} m)",
                    side.name()
                )));
            }
        }
        Ok(())
    }

    pub fn shoulder(&self, side: Side) -> Vec2 {
        let p = match side {
            Side::Left => self.left_shoulder,
            Side::Right => self.right_shoulder,
        };
        Vec2::new(p[0], p[1])
    }

    /// Hand position in wheel-plane coordinates.
    pub fn hand_position(&self, side: Side, q_s: f64, q_e: f64) -> Vec2 {
        let (l1, l2) = (self.upper_arm_length, self.forearm_length);
        let local = Vec2::new(
            l1 * q_s.cos() + l2 * (q_s + q_e).cos(),
            l1 * q_s.sin() + l2 * (q_s + q_e).sin(),
        );
        self.shoulder(side) + Vec2::new(side.mirror() * local.x, local.y)
    }

    /// Elbow position in wheel-plane coordinates.
    pub fn elbow_position(&self, side: Side, q_s: f64) -> Vec2 {
        let l1 = self.upper_arm_length;
        self.shoulder(side) + Vec2::new(side.mirror() * l1 * q_s.cos(), l1 * q_s.sin())
    }

    /// Hand-point Jacobian in wheel-plane coordinates.
    pub fn jacobian(&self, side: Side, q_s: f64, q_e: f64) -> Matrix2<f64> {
        let (l1, l2) = (self.upper_arm_length, self.forearm_length);
        let (s1, c1) = q_s.sin_cos();
        let (s12, c12) = (q_s + q_e).sin_cos();
        let m = side.mirror();
        Matrix2::new(
            m * (-l1 * s1 - l2 * s12),
            m * (-l2 * s12),
            l1 * c1 + l2 * c12,
            l2 * c12,
        )
    }

    pub fn mass_matrix(&self, q_e: f64) -> Matrix2<f64> {
        let (m1, m2) = (self.upper_arm_mass, self.forearm_mass);
        let (l1, c1, c2) = (self.upper_arm_length, self.upper_arm_com, self.forearm_com);
        let (i1, i2) = (self.upper_arm_inertia, self.forearm_inertia);
        let cos = q_e.cos();
        let m11 = i1 + i2 + m1 * c1 * c1 + m2 * (l1 * l1 + c2 * c2 + 2.0 * l1 * c2 * cos);
        let m12 = i2 + m2 * (c2 * c2 + l1 * c2 * cos);
        let m22 = i2 + m2 * c2 * c2;
        Matrix2::new(m11, m12, m12, m22)
    }

    /// Coriolis and centrifugal torques.
    pub fn coriolis(&self, q_e: f64, qd_s: f64, qd_e: f64) -> Vec2 {
        let h = self.forearm_mass * self.upper_arm_length * self.forearm_com * q_e.sin();
        Vec2::new(-h * (2.0 * qd_s * qd_e + qd_e * qd_e), h * qd_s * qd_s)
    }

    /// Gravity torques for gravity along -y of the wheel plane.
    pub fn gravity(&self, q_s: f64, q_e: f64) -> Vec2 {
        let g = self.g_eff;
        let (m1, m2) = (self.upper_arm_mass, self.forearm_mass);
        let (l1, c1, c2) = (self.upper_arm_length, self.upper_arm_com, self.forearm_com);
        let outer = m2 * c2 * g * (q_s + q_e).cos();
        Vec2::new((m1 * c1 + m2 * l1) * g * q_s.cos() + outer, outer)
    }

    /// One-sided elbow limit torque, zero inside the limits.
    pub fn elbow_limit_torque(&self, q_e: f64) -> f64 {
        let (lo, hi) = (self.elbow_limit_margin, PI - self.elbow_limit_margin);
        if q_e < lo {
            self.elbow_limit_stiffness * (lo - q_e)
        } else if q_e > hi {
            -self.elbow_limit_stiffness * (q_e - hi)
        } else {
            0.0
        }
    }

    /// In-plane gravity that makes the static right-shoulder torque at the
    /// straight-ahead grip posture equal `target`.
    pub fn calibrated_gravity(&self, wheel_radius: f64, target: f64) -> Result<f64> {
        let unit = ArmParams { g_eff: 1.0, ..*self };
        let q = posture(&unit, wheel_radius, 0.0)?;
        let per_g = unit.gravity(q[RIGHT_SHOULDER], q[RIGHT_ELBOW]).x;
        if per_g.abs() < 1e-9 {
            return Err(Error::InvalidConfig(
                "right shoulder carries no gravity torque at the hold posture".into(),
            ));
        }
        Ok(target / per_g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmState {
    pub q: [f64; 4],
    pub qd: [f64; 4],
}

impl ArmState {
    pub fn at_rest(q: [f64; 4]) -> Self {
        Self { q, qd: [0.0; 4] }
    }

    fn joints(&self, side: Side) -> (f64, f64, f64, f64) {
        let o = side.offset();
        (self.q[o], self.q[o + 1], self.qd[o], self.qd[o + 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum DriverMode {
    Tense,
    Relaxed,
}

impl DriverMode {
    pub const ALL: [DriverMode; 2] = [DriverMode::Tense, DriverMode::Relaxed];

    pub fn label(self) -> &'static str {
        match self {
            DriverMode::Tense => "Tense",
            DriverMode::Relaxed => "Relaxed",
        }
    }
}

/// Motion-controller gains. The diagonal joint gains are the same scalar on
/// every joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverGains {
    #[serde(rename = "K_P")]
    pub k_p: f64,
    #[serde(rename = "K_D")]
    pub k_d: f64,
    #[serde(rename = "K_F")]
    pub k_f: f64,
    /// N/rad
    #[serde(rename = "K_GS")]
    pub k_gs: f64,
}

impl DriverGains {
    pub fn tense() -> Self {
        Self {
            k_p: 225.0,
            k_d: 30.0,
            k_f: 1.0,
            k_gs: 800.0,
        }
    }

    pub fn relaxed() -> Self {
        Self {
            k_p: 30.0,
            k_d: 10.8,
            k_f: 0.0,
            k_gs: 0.0,
        }
    }

    pub fn for_mode(mode: DriverMode) -> Self {
        match mode {
            DriverMode::Tense => Self::tense(),
            DriverMode::Relaxed => Self::relaxed(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.k_p, self.k_d, self.k_f, self.k_gs]
            .iter()
            .all(|g| g.is_finite() && *g >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig("driver gains must be finite and non-negative".into()))
        }
    }
}

/// Point-to-point spring-damper between each hand and its grip point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandCoupling {
    /// N/m
    pub k_hand: f64,
    /// N s/m
    pub c_hand: f64,
}

impl Default for HandCoupling {
    fn default() -> Self {
        Self {
            k_hand: 5000.0,
            c_hand: 100.0,
        }
    }
}

impl HandCoupling {
    pub fn validate(&self) -> Result<()> {
        if self.k_hand > 0.0 && self.c_hand > 0.0 && self.k_hand.is_finite() && self.c_hand.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig("hand coupling must be positive".into()))
        }
    }
}

/// Grip points `[left, right]` on the rim. At zero wheel angle the right hand
/// is at `(radius, 0)`; both rotate rigidly (counter-clockwise positive).
pub fn grip_points(wheel_angle: f64, radius: f64) -> [Vec2; 2] {
    let right = radius * Vec2::new(wheel_angle.cos(), wheel_angle.sin());
    [-right, right]
}

/// Unit rim tangents `[left, right]` in the direction of positive rotation.
pub fn grip_tangents(wheel_angle: f64) -> [Vec2; 2] {
    let right = Vec2::new(-wheel_angle.sin(), wheel_angle.cos());
    [-right, right]
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Closed-form two-link inverse kinematics, outboard-elbow branch.
pub fn arm_ik(target: Vec2, side: Side, params: &ArmParams) -> Result<(f64, f64)> {
    let (l1, l2) = (params.upper_arm_length, params.forearm_length);
    let rel = target - params.shoulder(side);
    let local = Vec2::new(side.mirror() * rel.x, rel.y);
    let d2 = local.norm_squared();
    let cos_e = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&cos_e) {
        let rim_angle = target.y.atan2(target.x);
        let wheel_angle = match side {
            Side::Right => rim_angle,
            Side::Left => wrap_angle(rim_angle - PI),
        };
        return Err(Error::Unreachable {
            side: side.name(),
            wheel_angle,
            distance: d2.sqrt(),
        });
    }
    let q_e = cos_e.clamp(-1.0, 1.0).acos();
    let q_s = local.y.atan2(local.x) - (l2 * q_e.sin()).atan2(l1 + l2 * q_e.cos());
    Ok((q_s, q_e))
}

/// Joint angles with both hands on their grip points.
pub fn posture(params: &ArmParams, radius: f64, wheel_angle: f64) -> Result<[f64; 4]> {
    let grips = grip_points(wheel_angle, radius);
    let mut q = [0.0; 4];
    for side in Side::BOTH {
        let (q_s, q_e) = arm_ik(grips[side.index()], side, params).map_err(|e| match e {
            Error::Unreachable { side, distance, .. } => Error::Unreachable {
                side,
                wheel_angle,
                distance,
            },
            other => other,
        })?;
        q[side.offset()] = q_s;
        q[side.offset() + 1] = q_e;
    }
    Ok(q)
}

/// Desired joint positions, velocities and accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointTarget {
    pub q: [f64; 4],
    pub qd: [f64; 4],
    pub qdd: [f64; 4],
}

impl JointTarget {
    pub fn hold(q: [f64; 4]) -> Self {
        Self {
            q,
            ..Self::default()
        }
    }
}

/// Maps a reference wheel angle (and its first two time derivatives) to joint
/// space. Derivatives go through the chain rule with the IK map differentiated
/// by central differences.
pub fn desired_joint_traj(
    wheel_ref: f64,
    wheel_ref_rate: f64,
    wheel_ref_accel: f64,
    params: &ArmParams,
    radius: f64,
) -> Result<JointTarget> {
    const EPS: f64 = 1e-4;
    let q = posture(params, radius, wheel_ref)?;
    let qp = posture(params, radius, wheel_ref + EPS)?;
    let qm = posture(params, radius, wheel_ref - EPS)?;
    let mut target = JointTarget {
        q,
        ..JointTarget::default()
    };
    for i in 0..4 {
        let up = wrap_angle(qp[i] - q[i]);
        let down = wrap_angle(q[i] - qm[i]);
        let d1 = (up + down) / (2.0 * EPS);
        let d2 = (up - down) / (EPS * EPS);
        target.qd[i] = d1 * wheel_ref_rate;
        target.qdd[i] = d2 * wheel_ref_rate * wheel_ref_rate + d1 * wheel_ref_accel;
    }
    Ok(target)
}

/// Total tangential force the driver wants to apply to the rim, N. Positive
/// pushes the wheel toward positive angle.
pub fn desired_reaction_force(wheel_angle: f64, wheel_ref: f64, gains: &DriverGains) -> f64 {
    -gains.k_gs * (wheel_angle - wheel_ref)
}

/// Force the coupling exerts on the hand; the rim receives the opposite.
pub fn hand_coupling_force(
    hand_pos: Vec2,
    hand_vel: Vec2,
    grip_pos: Vec2,
    grip_vel: Vec2,
    coupling: &HandCoupling,
) -> Vec2 {
    coupling.k_hand * (grip_pos - hand_pos) + coupling.c_hand * (grip_vel - hand_vel)
}

/// Hand positions `[left, right]`.
pub fn hand_positions(params: &ArmParams, state: &ArmState) -> [Vec2; 2] {
    Side::BOTH.map(|side| {
        let (q_s, q_e, _, _) = state.joints(side);
        params.hand_position(side, q_s, q_e)
    })
}

/// Hand velocities `[left, right]`.
pub fn hand_velocities(params: &ArmParams, state: &ArmState) -> [Vec2; 2] {
    Side::BOTH.map(|side| {
        let (q_s, q_e, qd_s, qd_e) = state.joints(side);
        params.jacobian(side, q_s, q_e) * Vec2::new(qd_s, qd_e)
    })
}

/// Commanded joint acceleration of the computed-torque law:
/// `qdd_d - K_D (qd - qd_d) - K_P (q - q_d) - K_F J^T (F_rc - F_rc_d)`.
/// `force_error` holds `F_rc - F_rc_d` per hand (`[left, right]`).
pub fn control_accel(
    state: &ArmState,
    target: &JointTarget,
    force_error: &[Vec2; 2],
    gains: &DriverGains,
    params: &ArmParams,
) -> [f64; 4] {
    let mut a = [0.0; 4];
    for side in Side::BOTH {
        let (q_s, q_e, _, _) = state.joints(side);
        let jt_f = params.jacobian(side, q_s, q_e).transpose() * force_error[side.index()];
        let o = side.offset();
        for j in 0..2 {
            let i = o + j;
            let pos_err = if j == 0 {
                wrap_angle(state.q[i] - target.q[i])
            } else {
                state.q[i] - target.q[i]
            };
            a[i] = target.qdd[i]
                - gains.k_d * (state.qd[i] - target.qd[i])
                - gains.k_p * pos_err
                - gains.k_f * jt_f[j];
        }
    }
    a
}

/// Inverse dynamics `tau = M a + C + N + J^T F_ext`, with `f_ext` the force
/// each hand applies to the rim.
pub fn joint_torques(state: &ArmState, accel: &[f64; 4], f_ext: &[Vec2; 2], params: &ArmParams) -> [f64; 4] {
    let mut tau = [0.0; 4];
    for side in Side::BOTH {
        let (q_s, q_e, qd_s, qd_e) = state.joints(side);
        let o = side.offset();
        let a = Vec2::new(accel[o], accel[o + 1]);
        let t = params.mass_matrix(q_e) * a
            + params.coriolis(q_e, qd_s, qd_e)
            + params.gravity(q_s, q_e)
            + params.jacobian(side, q_s, q_e).transpose() * f_ext[side.index()];
        tau[o] = t.x;
        tau[o + 1] = t.y;
    }
    tau
}

/// Checks the mass matrix of both arms at this posture.
pub fn check_mass_matrix(state: &ArmState, params: &ArmParams) -> Result<()> {
    for side in Side::BOTH {
        let (q_s, q_e, _, _) = state.joints(side);
        let m = params.mass_matrix(q_e);
        let sym = (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-12 * m[(0, 0)].abs();
        if !(sym && m[(0, 0)] > 0.0 && m.determinant() > 0.0) {
            return Err(Error::MassMatrix {
                side: side.name(),
                q_shoulder: q_s,
                q_elbow: q_e,
            });
        }
    }
    Ok(())
}

/// Forward dynamics `qdd = M^-1 (tau + tau_limit - C - N - J^T F_ext)`.
pub fn joint_accel(state: &ArmState, tau: &[f64; 4], f_ext: &[Vec2; 2], params: &ArmParams) -> [f64; 4] {
    let mut qdd = [0.0; 4];
    for side in Side::BOTH {
        let (q_s, q_e, qd_s, qd_e) = state.joints(side);
        let o = side.offset();
        let rhs = Vec2::new(tau[o], tau[o + 1] + params.elbow_limit_torque(q_e))
            - params.coriolis(q_e, qd_s, qd_e)
            - params.gravity(q_s, q_e)
            - params.jacobian(side, q_s, q_e).transpose() * f_ext[side.index()];
        let m = params.mass_matrix(q_e);
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        qdd[o] = (m[(1, 1)] * rhs.x - m[(0, 1)] * rhs.y) / det;
        qdd[o + 1] = (m[(0, 0)] * rhs.y - m[(1, 0)] * rhs.x) / det;
    }
    qdd
}

fn pack(state: &ArmState) -> [f64; 8] {
    let mut x = [0.0; 8];
    x[..4].copy_from_slice(&state.q);
    x[4..].copy_from_slice(&state.qd);
    x
}

fn unpack(x: &[f64; 8]) -> ArmState {
    let mut s = ArmState::default();
    s.q.copy_from_slice(&x[..4]);
    s.qd.copy_from_slice(&x[4..]);
    s
}

/// One RK4 step with joint torques and hand forces held constant.
pub fn arm_forward_dynamics(
    state: &ArmState,
    tau: &[f64; 4],
    f_ext: &[Vec2; 2],
    params: &ArmParams,
    dt: f64,
) -> Result<ArmState> {
    check_mass_matrix(state, params)?;
    let x = crate::sim::rk4_step(&pack(state), dt, |x| {
        let s = unpack(x);
        let qdd = joint_accel(&s, tau, f_ext, params);
        let mut dx = [0.0; 8];
        dx[..4].copy_from_slice(&s.qd);
        dx[4..].copy_from_slice(&qdd);
        dx
    });
    Ok(unpack(&x))
}

/// Total kinetic energy of both arms, J.
pub fn kinetic_energy(state: &ArmState, params: &ArmParams) -> f64 {
    Side::BOTH
        .iter()
        .map(|&side| {
            let (_, q_e, qd_s, qd_e) = state.joints(side);
            let v = Vec2::new(qd_s, qd_e);
            0.5 * v.dot(&(params.mass_matrix(q_e) * v))
        })
        .sum()
}

/// Static gravity-hold torques at a posture.
pub fn nominal_torque(params: &ArmParams, q: &[f64; 4]) -> [f64; 4] {
    joint_torques(&ArmState::at_rest(*q), &[0.0; 4], &[Vec2::zeros(); 2], params)
}
