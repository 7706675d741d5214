//! Driving-performance and control-workload measures computed from a log.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arm::{DriverMode, JOINT_NAMES};
use crate::error::{Error, Result};
use crate::reasoning::ReferenceTrajectory;
use crate::sim::SimLog;

/// Closed analysis interval `[start, end]`, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidConfig(format!("bad analysis window [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Integral over `window` of the sampled signal `f(v)`: trapezoids between
/// samples, the last sample held to the window end. Samples must be in time
/// order; the value at `window.start` is interpolated.
fn integrate(t: &[f64], v: &[f64], window: &Window, f: impl Fn(f64) -> f64) -> f64 {
    let n = t.len().min(v.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..n {
        let (tk, vk) = (t[k], f(v[k]));
        if tk < window.start {
            prev = Some((tk, vk));
            continue;
        }
        if tk > window.end {
            break;
        }
        match prev {
            Some((tp, vp)) if tp >= window.start => acc += 0.5 * (vp + vk) * (tk - tp),
            Some((tp, vp)) => {
                // partial first interval, linear in f(v)
                let w = (window.start - tp) / (tk - tp);
                let v0 = vp + w * (vk - vp);
                acc += 0.5 * (v0 + vk) * (tk - window.start);
            }
            None => {}
        }
        prev = Some((tk, vk));
    }
    if let Some((tp, vp)) = prev {
        if tp >= window.start && tp < window.end {
            acc += vp * (window.end - tp);
        }
    }
    acc
}

fn window_values<'a>(t: &'a [f64], v: &'a [f64], window: &'a Window) -> impl Iterator<Item = f64> + 'a {
    t.iter()
        .zip(v)
        .filter(move |(tk, _)| **tk >= window.start && **tk <= window.end)
        .map(|(_, v)| *v)
}

/// Whether the effort integrand is the torque magnitude or the signed torque.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EffortIntegrand {
    #[default]
    Absolute,
    /// signed integral, reported as its magnitude
    Signed,
}

/// Time-integrated joint torque over the window, N m s.
pub fn actuation_effort(t: &[f64], tau: &[f64], window: &Window, integrand: EffortIntegrand) -> f64 {
    match integrand {
        EffortIntegrand::Absolute => integrate(t, tau, window, f64::abs),
        EffortIntegrand::Signed => integrate(t, tau, window, |v| v).abs(),
    }
}

/// Peak deviation from the nominal torque over the window, N m.
pub fn control_stress(t: &[f64], tau: &[f64], nominal: f64, window: &Window) -> f64 {
    window_values(t, tau, window).fold(0.0, |m, v| m.max((v - nominal).abs()))
}

/// Time-integrated deviation from the nominal torque, N m s.
pub fn control_load_quantity(t: &[f64], tau: &[f64], nominal: f64, window: &Window) -> f64 {
    integrate(t, tau, window, |v| (v - nominal).abs())
}

/// Largest `|y - y_ref|` inside the window, m.
pub fn peak_lateral_error(log: &SimLog, reference: &ReferenceTrajectory, window: &Window) -> Result<f64> {
    let y = log.channel("y")?;
    Ok(log
        .time()
        .iter()
        .zip(y)
        .filter(|(t, _)| **t >= window.start && **t <= window.end)
        .fold(0.0, |m, (t, y)| m.max((y - reference.lateral_at(*t)).abs())))
}

fn peak_abs(log: &SimLog, name: &str, window: &Window) -> Result<f64> {
    let v = log.channel(name)?;
    Ok(window_values(log.time(), v, window).fold(0.0, |m, v| m.max(v.abs())))
}

/// Which torque the stress and load measures are referenced to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NominalTorque {
    /// static gravity-hold torque at the initial posture
    #[default]
    GravityHold,
    /// mean joint torque over the analysis window
    RunMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub effort: EffortIntegrand,
    pub nominal: NominalTorque,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub peak_lateral_error: f64,
    pub peak_ads_torque: f64,
    pub peak_hand_torque: f64,
    pub peak_hand_force: f64,
    pub ads_saturated: bool,
}

impl PerformanceReport {
    /// `ads_limit` is the actuator torque limit; saturation is counted with a
    /// relative tolerance of 1e-9.
    pub fn from_log(log: &SimLog, reference: &ReferenceTrajectory, window: &Window, ads_limit: f64) -> Result<Self> {
        let peak_ads_torque = peak_abs(log, "T_ADS", window)?;
        let force_l = peak_abs(log, "F_hand_left", window)?;
        let force_r = peak_abs(log, "F_hand_right", window)?;
        Ok(Self {
            peak_lateral_error: peak_lateral_error(log, reference, window)?,
            peak_ads_torque,
            peak_hand_torque: peak_abs(log, "T_hm", window)?,
            peak_hand_force: force_l.max(force_r),
            ads_saturated: peak_ads_torque >= ads_limit * (1.0 - 1e-9),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointWorkload {
    pub joint: String,
    pub actuation_effort: f64,
    pub control_stress: f64,
    pub control_load_quantity: f64,
    pub tau_nominal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadReport {
    pub condition: String,
    pub mode: String,
    pub joints: Vec<JointWorkload>,
}

impl WorkloadReport {
    /// Reads `tau_<joint>` channels; `gravity_hold` gives the per-joint
    /// static torque at the initial posture.
    pub fn from_log(
        log: &SimLog,
        window: &Window,
        gravity_hold: &[f64; 4],
        options: &MetricOptions,
        condition: &str,
        mode: DriverMode,
    ) -> Result<Self> {
        let t = log.time();
        let mut joints = Vec::with_capacity(4);
        for (j, name) in JOINT_NAMES.iter().enumerate() {
            let tau = log.channel(&format!("tau_{name}"))?;
            let nominal = match options.nominal {
                NominalTorque::GravityHold => gravity_hold[j],
                NominalTorque::RunMean => integrate(t, tau, window, |v| v) / window.duration(),
            };
            joints.push(JointWorkload {
                joint: name.to_string(),
                actuation_effort: actuation_effort(t, tau, window, options.effort),
                control_stress: control_stress(t, tau, nominal, window),
                control_load_quantity: control_load_quantity(t, tau, nominal, window),
                tau_nominal: nominal,
            });
        }
        Ok(Self {
            condition: condition.to_string(),
            mode: mode.label().to_string(),
            joints,
        })
    }

    pub fn joint(&self, name: &str) -> Option<&JointWorkload> {
        self.joints.iter().find(|j| j.joint == name)
    }
}

/// Descending 1-based ranks; ties keep input order; NaN entries get `None`.
pub fn descending_ranks(values: &[f64]) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| !values[i].is_nan()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![None; values.len()];
    for (r, i) in order.into_iter().enumerate() {
        ranks[i] = Some(r + 1);
    }
    ranks
}

pub const INDICATORS: [(&str, &str); 3] = [
    ("actuation_effort", "N m s"),
    ("control_stress", "N m"),
    ("control_load_quantity", "N m s"),
];

/// One sweep cell as seen by the workload table. `None` marks a failed cell.
pub struct TableCell<'a> {
    pub condition: &'a str,
    pub mode: &'a str,
    pub workload: Option<&'a WorkloadReport>,
}

/// Tidy workload table: one row per joint, indicator and cell, ranked within
/// each (joint, indicator) group across cells.
pub fn write_workload_table<W: Write>(cells: &[TableCell<'_>], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["joint", "indicator", "unit", "condition", "mode", "value", "rank"])?;
    for joint in JOINT_NAMES {
        for (indicator, unit) in INDICATORS {
            let values: Vec<f64> = cells
                .iter()
                .map(|c| {
                    c.workload
                        .and_then(|r| r.joint(joint))
                        .map_or(f64::NAN, |j| match indicator {
                            "actuation_effort" => j.actuation_effort,
                            "control_stress" => j.control_stress,
                            _ => j.control_load_quantity,
                        })
                })
                .collect();
            let ranks = descending_ranks(&values);
            for ((cell, v), rank) in cells.iter().zip(&values).zip(ranks) {
                out.write_record([
                    joint,
                    indicator,
                    unit,
                    cell.condition,
                    cell.mode,
                    &format!("{v:.9e}"),
                    &rank.map(|r| r.to_string()).unwrap_or_default(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
