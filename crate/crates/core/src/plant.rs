//! Arms and wheel coupled through the hand springs, plus the driver's
//! inner-loop motion controller acting on that plant.

use crate::arm::{
    self, control_accel, desired_reaction_force, grip_points, grip_tangents, hand_coupling_force,
    hand_positions, hand_velocities, joint_accel, joint_torques, ArmParams, ArmState, DriverGains,
    HandCoupling, JointTarget, Vec2,
};
use crate::sim::rk4_step;
use crate::steering::{self, column_sensor, self_align_torque, WheelParams, WheelState};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub arm: ArmState,
    pub wheel: WheelState,
}

/// Interaction forces at the hand-rim interface for one plant state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// grip points on the rim `[left, right]`
    pub grips: [Vec2; 2],
    /// unit rim tangents at the grips
    pub tangents: [Vec2; 2],
    /// force each hand applies to the rim
    pub rim_forces: [Vec2; 2],
    /// net hand torque about the column
    pub hand_torque: f64,
}

impl Contact {
    /// Tangential component of each hand's force on the rim, N.
    pub fn tangential(&self) -> [f64; 2] {
        [0, 1].map(|i| self.rim_forces[i].dot(&self.tangents[i]))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Plant<'a> {
    pub arm: &'a ArmParams,
    pub wheel: &'a WheelParams,
    pub hand: &'a HandCoupling,
}

impl<'a> Plant<'a> {
    pub fn contact(&self, s: &PlantState) -> Contact {
        let grips = grip_points(s.wheel.angle, self.wheel.radius);
        let tangents = grip_tangents(s.wheel.angle);
        let hands = hand_positions(self.arm, &s.arm);
        let hand_vel = hand_velocities(self.arm, &s.arm);
        let rim_forces = [0, 1].map(|i| {
            let grip_vel = tangents[i] * (s.wheel.rate * self.wheel.radius);
            -hand_coupling_force(hands[i], hand_vel[i], grips[i], grip_vel, self.hand)
        });
        Contact {
            grips,
            tangents,
            rim_forces,
            hand_torque: column_sensor(&rim_forces, &grips),
        }
    }

    /// One RK4 step of the coupled arms and wheel. Joint torques, the external
    /// wheel torque and the reference rate are held over the step.
    pub fn step(&self, s: &PlantState, tau: &[f64; 4], wheel_torque: f64, ref_rate: f64, dt: f64) -> PlantState {
        let x0 = pack(s);
        let x = rk4_step(&x0, dt, |x| {
            let st = unpack(x);
            let c = self.contact(&st);
            let qdd = joint_accel(&st.arm, tau, &c.rim_forces, self.arm);
            let t_sw = self_align_torque(st.wheel.angle, st.wheel.rate, ref_rate, self.wheel);
            let wdd = steering::wheel_accel(c.hand_torque, wheel_torque, t_sw, self.wheel);
            let mut dx = [0.0; 10];
            dx[..4].copy_from_slice(&st.arm.qd);
            dx[4..8].copy_from_slice(&qdd);
            dx[8] = st.wheel.rate;
            dx[9] = wdd;
            dx
        });
        unpack(&x)
    }
}

fn pack(s: &PlantState) -> [f64; 10] {
    let mut x = [0.0; 10];
    x[..4].copy_from_slice(&s.arm.q);
    x[4..8].copy_from_slice(&s.arm.qd);
    x[8] = s.wheel.angle;
    x[9] = s.wheel.rate;
    x
}

fn unpack(x: &[f64; 10]) -> PlantState {
    let mut s = PlantState::default();
    s.arm.q.copy_from_slice(&x[..4]);
    s.arm.qd.copy_from_slice(&x[4..8]);
    s.wheel.angle = x[8];
    s.wheel.rate = x[9];
    s
}

/// Output of one evaluation of the driver's motion controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverCommand {
    pub tau: [f64; 4],
    pub accel: [f64; 4],
    /// total desired tangential rim force, N
    pub desired_force: f64,
    /// `max |qdd(tau) - a_q|` through the forward model, rad/s^2
    pub identity_residual: f64,
}

/// Computed-torque driver controller. The desired reaction force enters both
/// the force-error feedback and, as the anticipated hand load, the inverse
/// dynamics; the measured force only enters through the feedback term.
pub fn driver_command(
    state: &PlantState,
    contact: &Contact,
    target: &JointTarget,
    wheel_ref: f64,
    gains: &DriverGains,
    params: &ArmParams,
) -> DriverCommand {
    let desired_force = desired_reaction_force(state.wheel.angle, wheel_ref, gains);
    let per_hand = 0.5 * desired_force;
    let measured = contact.tangential();
    let desired_vec = contact.tangents.map(|t| t * per_hand);
    let force_error = [0, 1].map(|i| contact.tangents[i] * (measured[i] - per_hand));
    let accel = control_accel(&state.arm, target, &force_error, gains, params);
    let tau = joint_torques(&state.arm, &accel, &desired_vec, params);
    let back = joint_accel(&state.arm, &tau, &desired_vec, params);
    let identity_residual = back
        .iter()
        .zip(&accel)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    DriverCommand {
        tau,
        accel,
        desired_force,
        identity_residual,
    }
}

/// Plant at rest with both hands on the grips at `wheel_angle`.
pub fn settled_state(params: &ArmParams, wheel: &WheelParams, wheel_angle: f64) -> crate::Result<PlantState> {
    Ok(PlantState {
        arm: ArmState::at_rest(arm::posture(params, wheel.radius, wheel_angle)?),
        wheel: WheelState {
            angle: wheel_angle,
            rate: 0.0,
        },
    })
}
