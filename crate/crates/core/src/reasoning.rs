//! Outer-loop driving task reasoning shared by the driver model and the
//! automated steering controller: pedal reference from speed/headway errors
//! and a forward-gaze steering reference.

use std::f64::consts::FRAC_PI_2;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{VehicleState, MIN_LATERAL_SPEED};

/// Reasoning gains, named after their usual symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasoningParams {
    /// desired time headway, s
    #[serde(rename = "T_hw_d")]
    pub headway_time: f64,
    /// %/m
    #[serde(rename = "H_D")]
    pub distance_gain: f64,
    /// %/(m/s)
    #[serde(rename = "H_V")]
    pub speed_gain: f64,
    /// pedal task delay, s
    #[serde(rename = "tau_p")]
    pub pedal_delay: f64,
    /// steering compensation gain, rad/m
    #[serde(rename = "h")]
    pub steer_gain: f64,
    /// forward-gaze preview time, s
    #[serde(rename = "T_p")]
    pub preview_time: f64,
    /// steering task delay, s
    #[serde(rename = "tau_sw")]
    pub steer_delay: f64,
}

impl Default for ReasoningParams {
    fn default() -> Self {
        Self {
            headway_time: 0.5,
            distance_gain: 20.0,
            speed_gain: 20.0,
            pedal_delay: 0.4,
            steer_gain: 1.0,
            preview_time: 0.5,
            steer_delay: 0.1,
        }
    }
}

impl ReasoningParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.headway_time,
            self.distance_gain,
            self.speed_gain,
            self.pedal_delay,
            self.steer_gain,
            self.preview_time,
            self.steer_delay,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("reasoning parameters must be finite".into()));
        }
        if self.preview_time <= 0.0 {
            return Err(Error::InvalidConfig("T_p must be positive".into()));
        }
        if self.pedal_delay < 0.0 || self.steer_delay < 0.0 {
            return Err(Error::InvalidConfig("delays must be non-negative".into()));
        }
        if self.steer_gain <= 0.0 {
            return Err(Error::InvalidConfig("h must be positive".into()));
        }
        Ok(())
    }
}

/// Headway to a preceding vehicle, for car-following use of the pedal law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Headway {
    pub distance: f64,
    pub lead_speed: f64,
}

/// Reference pedal position in percent, clamped to [-100, 100].
///
/// With a preceding vehicle this is the headway/speed law
/// `H_D (D - T_hw V_h) + H_V (V_p - V_ref)`. Without one the headway term is
/// dropped and the host tracks the reference speed: `H_V (V_ref - V_h)`.
pub fn pedal_reference(
    speed: f64,
    speed_ref: f64,
    headway: Option<Headway>,
    params: &ReasoningParams,
) -> f64 {
    let raw = match headway {
        Some(hw) => {
            let desired = params.headway_time * speed;
            params.distance_gain * (hw.distance - desired)
                + params.speed_gain * (hw.lead_speed - speed_ref)
        }
        None => params.speed_gain * (speed_ref - speed),
    };
    raw.clamp(-100.0, 100.0)
}

/// Time-indexed reference path, linearly interpolated and clamped at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    t: Vec<f64>,
    v_ref: Vec<f64>,
    y_ref: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReferenceRow {
    t: f64,
    v_ref: f64,
    y_ref: f64,
}

impl ReferenceTrajectory {
    pub fn new(t: Vec<f64>, v_ref: Vec<f64>, y_ref: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::Reference("no samples".into()));
        }
        if t.len() != v_ref.len() || t.len() != y_ref.len() {
            return Err(Error::Reference("column lengths differ".into()));
        }
        if t.iter().chain(&v_ref).chain(&y_ref).any(|v| !v.is_finite()) {
            return Err(Error::Reference("non-finite sample".into()));
        }
        if let Some(w) = t.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Reference(format!(
                "time must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { t, v_ref, y_ref })
    }

    /// Constant lateral position, used for lane-keeping targets.
    pub fn constant(v_ref: f64, y_ref: f64) -> Self {
        Self {
            t: vec![0.0],
            v_ref: vec![v_ref],
            y_ref: vec![y_ref],
        }
    }

    /// Reads `t,v_ref,y_ref` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["t", "v_ref", "y_ref"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Reference(format!(
                "expected header `t,v_ref,y_ref`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut t, mut v, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: ReferenceRow = row?;
            t.push(row.t);
            v.push(row.v_ref);
            y.push(row.y_ref);
        }
        Self::new(t, v, y)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for i in 0..self.t.len() {
            w.serialize(ReferenceRow {
                t: self.t[i],
                v_ref: self.v_ref[i],
                y_ref: self.y_ref[i],
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    fn interp(&self, col: &[f64], t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return col[0];
        }
        if t >= self.t[n - 1] {
            return col[n - 1];
        }
        let i = self.t.partition_point(|&ti| ti <= t);
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let w = (t - t0) / (t1 - t0);
        col[i - 1] + w * (col[i] - col[i - 1])
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        self.interp(&self.v_ref, t)
    }

    pub fn lateral_at(&self, t: f64) -> f64 {
        self.interp(&self.y_ref, t)
    }
}

/// Lateral deflection between the previewed path point and the kinematically
/// predicted vehicle position, `T_p` seconds ahead.
pub fn preview_deflection(
    state: &VehicleState,
    reference: &ReferenceTrajectory,
    t: f64,
    params: &ReasoningParams,
) -> f64 {
    let predicted = state.y + state.speed * state.psi.sin() * params.preview_time;
    reference.lateral_at(t + params.preview_time) - predicted
}

/// Forward-gaze steering-wheel reference `h * y_srm`, clamped to +-pi/2.
/// The caller applies the steering delay.
pub fn steering_reference(
    state: &VehicleState,
    reference: &ReferenceTrajectory,
    t: f64,
    params: &ReasoningParams,
) -> Result<f64> {
    if !(state.speed > MIN_LATERAL_SPEED) {
        return Err(Error::SpeedTooLow { speed: state.speed });
    }
    let y_srm = preview_deflection(state, reference, t, params);
    Ok((params.steer_gain * y_srm).clamp(-FRAC_PI_2, FRAC_PI_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConflictKind {
    None,
    /// Driver and automation plan different maneuvers.
    TypeI,
    /// Same maneuver, different resulting trajectory.
    TypeII,
}

/// How the automation's reasoning differs from the driver's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictSpec {
    pub kind: ConflictKind,
    pub ads_params: ReasoningParams,
    pub ads_y_ref_override: Option<f64>,
}

/// Steering gain the automation uses under a type II conflict.
pub const TYPE_II_STEER_GAIN: f64 = 1.5;
/// Steering delay the automation uses under a type II conflict, s.
pub const TYPE_II_STEER_DELAY: f64 = 0.05;

impl ConflictSpec {
    pub fn none(driver: &ReasoningParams) -> Self {
        Self {
            kind: ConflictKind::None,
            ads_params: *driver,
            ads_y_ref_override: None,
        }
    }

    /// The automation keeps the lane at `lane_y` while the driver overtakes.
    pub fn type_i(driver: &ReasoningParams, lane_y: f64) -> Self {
        Self {
            kind: ConflictKind::TypeI,
            ads_params: *driver,
            ads_y_ref_override: Some(lane_y),
        }
    }

    /// The automation tracks the same path with a more aggressive tuning.
    pub fn type_ii(driver: &ReasoningParams) -> Self {
        Self {
            kind: ConflictKind::TypeII,
            ads_params: ReasoningParams {
                steer_gain: TYPE_II_STEER_GAIN,
                steer_delay: TYPE_II_STEER_DELAY,
                ..*driver
            },
            ads_y_ref_override: None,
        }
    }

    pub fn validate(&self, driver: &ReasoningParams) -> Result<()> {
        self.ads_params.validate()?;
        let ok = match self.kind {
            ConflictKind::None => self.ads_params == *driver,
            ConflictKind::TypeI => self.ads_y_ref_override.is_some_and(f64::is_finite),
            ConflictKind::TypeII => {
                self.ads_params.steer_gain == TYPE_II_STEER_GAIN
                    && self.ads_params.steer_delay == TYPE_II_STEER_DELAY
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "conflict spec inconsistent with kind {:?}",
                self.kind
            )))
        }
    }
}

/// Steering reference of the automation under the given conflict.
pub fn ads_steering_reference(
    state: &VehicleState,
    reference: &ReferenceTrajectory,
    t: f64,
    spec: &ConflictSpec,
) -> Result<f64> {
    match (spec.kind, spec.ads_y_ref_override) {
        (ConflictKind::TypeI, Some(lane_y)) => {
            let lane = ReferenceTrajectory::constant(reference.speed_at(t), lane_y);
            steering_reference(state, &lane, t, &spec.ads_params)
        }
        _ => steering_reference(state, reference, t, &spec.ads_params),
    }
}
