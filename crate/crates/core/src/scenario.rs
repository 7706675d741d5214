//! Scenario configuration, synthetic overtaking reference, the closed-loop
//! run that wires every model together, and the condition sweep.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arm::{
    desired_joint_traj, nominal_torque, posture, ArmParams, DriverGains, DriverMode, HandCoupling,
    JointTarget, JOINT_NAMES,
};
use crate::error::{Error, Result};
use crate::metrics::{MetricOptions, PerformanceReport, Window, WorkloadReport};
use crate::plant::{driver_command, settled_state, Plant};
use crate::reasoning::{
    ads_steering_reference, pedal_reference, steering_reference, ConflictSpec, ReasoningParams,
    ReferenceTrajectory,
};
use crate::sim::{run_loop, DelayLine, SimClock, SimLog};
use crate::steering::{ads_torque, self_align_torque, AdsActuator, WheelParams};
use crate::vehicle::{step_lateral, step_longitudinal, VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// manual control, automation off
    #[serde(rename = "MC")]
    Manual,
    NoConflict,
    ConflictI,
    ConflictII,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Manual,
        Condition::NoConflict,
        Condition::ConflictI,
        Condition::ConflictII,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Condition::Manual => "MC",
            Condition::NoConflict => "NoConflict",
            Condition::ConflictI => "ConflictI",
            Condition::ConflictII => "ConflictII",
        }
    }

    pub fn ads_enabled(self) -> bool {
        self != Condition::Manual
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown condition `{s}` (MC, NoConflict, ConflictI, ConflictII)")))
    }
}

pub fn parse_mode(s: &str) -> Result<DriverMode> {
    DriverMode::ALL
        .into_iter()
        .find(|m| m.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::InvalidConfig(format!("unknown mode `{s}` (Tense, Relaxed)")))
}

/// Single-lane-change-out, single-lane-change-back overtake at constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticOvertake {
    /// m/s
    #[serde(rename = "V0")]
    pub speed: f64,
    /// m, positive to the left
    pub lane_offset: f64,
    pub t_start_left: f64,
    pub duration_left: f64,
    pub t_start_right: f64,
    pub duration_right: f64,
}

impl Default for SyntheticOvertake {
    fn default() -> Self {
        Self {
            speed: 25.0,
            lane_offset: 3.5,
            t_start_left: 4.0,
            duration_left: 4.6,
            t_start_right: 4.0 + 4.6 + 6.0,
            duration_right: 4.4,
        }
    }
}

/// Quintic smoothstep; zero first and second derivatives at both ends.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

impl SyntheticOvertake {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let vals = [
            self.speed,
            self.lane_offset,
            self.t_start_left,
            self.duration_left,
            self.t_start_right,
            self.duration_right,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("overtake parameters must be finite".into()));
        }
        if !(self.lane_offset > 0.0 && self.speed > 0.0 && self.duration_left > 0.0 && self.duration_right > 0.0) {
            return Err(Error::InvalidConfig("V0, lane_offset and durations must be positive".into()));
        }
        if self.t_start_left < 0.0 {
            return Err(Error::InvalidConfig("t_start_left must be >= 0".into()));
        }
        if self.t_start_left + self.duration_left > self.t_start_right {
            return Err(Error::InvalidConfig("lane changes overlap".into()));
        }
        if self.t_start_right + self.duration_right > horizon {
            return Err(Error::InvalidConfig(format!(
                "return lane change ends at {:.3} s, after the {horizon:.3} s horizon",
                self.t_start_right + self.duration_right
            )));
        }
        Ok(())
    }

    pub fn lateral(&self, t: f64) -> f64 {
        let out = smoothstep((t - self.t_start_left) / self.duration_left);
        let back = smoothstep((t - self.t_start_right) / self.duration_right);
        self.lane_offset * (out - back)
    }
}

/// Samples the overtake every `dt` from 0 through `horizon` (inclusive).
pub fn generate_reference(p: &SyntheticOvertake, dt: f64, horizon: f64) -> Result<ReferenceTrajectory> {
    p.validate(horizon)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig("reference dt must be positive".into()));
    }
    let n = (horizon / dt).ceil() as usize + 1;
    let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let y = t.iter().map(|&t| p.lateral(t)).collect();
    ReferenceTrajectory::new(t, vec![p.speed; n], y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSource {
    Synthetic(SyntheticOvertake),
    /// `t,v_ref,y_ref` file; relative paths resolve against the config file
    Csv(PathBuf),
}

impl Default for ReferenceSource {
    fn default() -> Self {
        ReferenceSource::Synthetic(SyntheticOvertake::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverGainTable {
    pub tense: DriverGains,
    pub relaxed: DriverGains,
}

impl Default for DriverGainTable {
    fn default() -> Self {
        Self {
            tense: DriverGains::tense(),
            relaxed: DriverGains::relaxed(),
        }
    }
}

impl DriverGainTable {
    pub fn get(&self, mode: DriverMode) -> DriverGains {
        match mode {
            DriverMode::Tense => self.tense,
            DriverMode::Relaxed => self.relaxed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConflictParams {
    /// lateral position the automation holds under `ConflictI`, m
    pub lane_y: f64,
}

impl Default for ConflictParams {
    fn default() -> Self {
        Self { lane_y: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub condition: Condition,
    pub mode: DriverMode,
    /// Recorded with the outputs. The closed-loop run has no random inputs,
    /// so the seed only matters to callers that draw from it.
    pub seed: u64,
    pub clock: SimClock,
    pub reference: ReferenceSource,
    pub vehicle: VehicleParams,
    pub reasoning: ReasoningParams,
    pub driver: DriverGainTable,
    pub arm: ArmParams,
    pub hand: HandCoupling,
    pub wheel: WheelParams,
    pub ads: AdsActuator,
    pub conflict: ConflictParams,
    pub metrics: MetricOptions,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            condition: Condition::Manual,
            mode: DriverMode::Tense,
            seed: 0,
            clock: SimClock::default(),
            reference: ReferenceSource::default(),
            vehicle: VehicleParams::default(),
            reasoning: ReasoningParams::default(),
            driver: DriverGainTable::default(),
            arm: ArmParams::default(),
            hand: HandCoupling::default(),
            wheel: WheelParams::default(),
            ads: AdsActuator {
                enabled: false,
                ..AdsActuator::default()
            },
            conflict: ConflictParams::default(),
            metrics: MetricOptions::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    /// Default configuration for one sweep cell.
    pub fn for_cell(condition: Condition, mode: DriverMode) -> Self {
        Self::default().with_cell(condition, mode)
    }

    /// Same configuration with another condition/mode; the actuator switch
    /// follows the condition.
    pub fn with_cell(mut self, condition: Condition, mode: DriverMode) -> Self {
        self.condition = condition;
        self.mode = mode;
        self.ads.enabled = condition.ads_enabled();
        self
    }

    /// Parses JSON. An omitted `ads.enabled` follows the condition.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let explicit_enable = value
            .get("ads")
            .and_then(|a| a.get("enabled"))
            .is_some();
        let mut cfg: ScenarioConfig = serde_json::from_value(value)?;
        if !explicit_enable {
            cfg.ads.enabled = cfg.condition.ads_enabled();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative reference CSV path is made relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        if let ReferenceSource::Csv(p) = &mut cfg.reference {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.clock.validate()?;
        self.vehicle.validate()?;
        self.reasoning.validate()?;
        self.driver.tense.validate()?;
        self.driver.relaxed.validate()?;
        self.wheel.validate()?;
        self.arm.validate(self.wheel.radius)?;
        self.hand.validate()?;
        self.ads.validate()?;
        if self.ads.enabled != self.condition.ads_enabled() {
            return Err(Error::InvalidConfig(format!(
                "condition {} requires ads.enabled = {}",
                self.condition,
                self.condition.ads_enabled()
            )));
        }
        if !self.conflict.lane_y.is_finite() {
            return Err(Error::InvalidConfig("conflict.lane_y must be finite".into()));
        }
        if let ReferenceSource::Synthetic(p) = &self.reference {
            p.validate(self.clock.t_end)?;
            if p.speed <= crate::vehicle::MIN_LATERAL_SPEED {
                return Err(Error::InvalidConfig("V0 too low for the lateral model".into()));
            }
        }
        Ok(())
    }

    pub fn conflict_spec(&self) -> ConflictSpec {
        match self.condition {
            Condition::Manual | Condition::NoConflict => ConflictSpec::none(&self.reasoning),
            Condition::ConflictI => ConflictSpec::type_i(&self.reasoning, self.conflict.lane_y),
            Condition::ConflictII => ConflictSpec::type_ii(&self.reasoning),
        }
    }

    pub fn build_reference(&self) -> Result<ReferenceTrajectory> {
        match &self.reference {
            ReferenceSource::Synthetic(p) => {
                let horizon = self.clock.t_end + self.reasoning.preview_time + 1.0;
                generate_reference(p, self.clock.dt_outer.min(0.01), horizon)
            }
            ReferenceSource::Csv(path) => {
                let file = std::fs::File::open(path)?;
                ReferenceTrajectory::from_csv(file)
            }
        }
    }

    pub fn analysis_window(&self) -> Result<Window> {
        Window::new(self.clock.t_stabilize, self.clock.t_end)
    }
}

/// Summary of one run as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub condition: String,
    pub mode: String,
    pub seed: u64,
    pub performance: PerformanceReport,
    pub workload: WorkloadReport,
    /// largest inverse/forward dynamics mismatch seen, rad/s^2
    pub max_identity_residual: f64,
}

#[derive(Debug)]
pub struct ScenarioOutput {
    pub log: SimLog,
    pub reference: ReferenceTrajectory,
    pub report: ScenarioReport,
}

/// Slot indices of every logged channel.
struct Slots {
    x: usize,
    y: usize,
    psi: usize,
    r: usize,
    v_y: usize,
    speed: usize,
    y_ref: usize,
    pedal: usize,
    wheel_ref: usize,
    ads_ref: usize,
    angle: usize,
    rate: usize,
    t_ads: usize,
    t_hm: usize,
    t_sw: usize,
    f_des: usize,
    f_left: usize,
    f_right: usize,
    q: usize,
    qd: usize,
    tau: usize,
    residual: usize,
}

fn register_channels(log: &mut SimLog) -> Result<Slots> {
    let mut slots = Slots {
        x: log.register("x", "m")?,
        y: log.register("y", "m")?,
        psi: log.register("psi", "rad")?,
        r: log.register("r", "rad/s")?,
        v_y: log.register("v_y", "m/s")?,
        speed: log.register("V", "m/s")?,
        y_ref: log.register("y_ref", "m")?,
        pedal: log.register("delta_p", "%")?,
        wheel_ref: log.register("delta_sw_r", "rad")?,
        ads_ref: log.register("delta_sw_ads_r", "rad")?,
        angle: log.register("delta_sw", "rad")?,
        rate: log.register("delta_sw_dot", "rad/s")?,
        t_ads: log.register("T_ADS", "N m")?,
        t_hm: log.register("T_hm", "N m")?,
        t_sw: log.register("T_sw", "N m")?,
        f_des: log.register("F_rc_d", "N")?,
        f_left: log.register("F_hand_left", "N")?,
        f_right: log.register("F_hand_right", "N")?,
        q: 0,
        qd: 0,
        tau: 0,
        residual: 0,
    };
    for (k, prefix, unit) in [(0, "q", "rad"), (1, "qd", "rad/s"), (2, "tau", "N m")] {
        let first = log.register(&format!("{prefix}_{}", JOINT_NAMES[0]), unit)?;
        for name in &JOINT_NAMES[1..] {
            log.register(&format!("{prefix}_{name}"), unit)?;
        }
        match k {
            0 => slots.q = first,
            1 => slots.qd = first,
            _ => slots.tau = first,
        }
    }
    slots.residual = log.register("identity_residual", "rad/s^2")?;
    Ok(slots)
}

/// Everything that evolves during a run.
struct RunState {
    plant: crate::plant::PlantState,
    vehicle: VehicleState,
    pedal: f64,
    wheel_ref: f64,
    wheel_ref_rate: f64,
    ads_ref: f64,
    target: JointTarget,
    target_time: f64,
    history: [f64; 2],
    max_residual: f64,
}

/// Runs one closed-loop scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let wrap = |t: f64| {
        let condition = cfg.condition.label().to_string();
        let mode = cfg.mode.label().to_string();
        move |e: Error| Error::Scenario {
            condition,
            mode,
            t,
            source: Box::new(e),
        }
    };
    cfg.validate().map_err(wrap(0.0))?;
    let reference = cfg.build_reference().map_err(wrap(0.0))?;
    let clock = cfg.clock;
    let gains = cfg.driver.get(cfg.mode);
    let conflict = cfg.conflict_spec();
    let plant = Plant {
        arm: &cfg.arm,
        wheel: &cfg.wheel,
        hand: &cfg.hand,
    };

    let dt = clock.dt_inner;
    let d_out = clock.dt_outer;
    let mut steer_delay = DelayLine::new(cfg.reasoning.steer_delay, d_out, 0.0).map_err(wrap(0.0))?;
    let mut pedal_delay = DelayLine::new(cfg.reasoning.pedal_delay, d_out, 0.0).map_err(wrap(0.0))?;
    let mut ads_delay = DelayLine::new(conflict.ads_params.steer_delay, d_out, 0.0).map_err(wrap(0.0))?;

    let initial = settled_state(&cfg.arm, &cfg.wheel, 0.0).map_err(wrap(0.0))?;
    let hold = nominal_torque(&cfg.arm, &initial.arm.q);
    let mut vehicle = VehicleState::cruising(reference.speed_at(0.0));
    vehicle.y = reference.lateral_at(0.0);

    let mut state = RunState {
        plant: initial,
        vehicle,
        pedal: 0.0,
        wheel_ref: 0.0,
        wheel_ref_rate: 0.0,
        ads_ref: 0.0,
        target: JointTarget::hold(initial.arm.q),
        target_time: 0.0,
        history: [0.0; 2],
        max_residual: 0.0,
    };

    let mut log = SimLog::new(dt);
    let slots = register_channels(&mut log).map_err(wrap(0.0))?;

    let outer = |t: f64, s: &mut RunState| -> Result<()> {
        let mut inner = || -> Result<()> {
            let raw = steering_reference(&s.vehicle, &reference, t, &cfg.reasoning)?;
            steer_delay.push(t, raw)?;
            let wheel_ref = steer_delay.read(t)?;
            let raw_ads = ads_steering_reference(&s.vehicle, &reference, t, &conflict)?;
            ads_delay.push(t, raw_ads)?;
            s.ads_ref = ads_delay.read(t)?;
            let raw_pedal = pedal_reference(s.vehicle.speed, reference.speed_at(t), None, &cfg.reasoning);
            pedal_delay.push(t, raw_pedal)?;
            s.pedal = pedal_delay.read(t)?;

            // backward differences of the delayed reference
            let rate = (wheel_ref - s.history[0]) / d_out;
            let prev_rate = (s.history[0] - s.history[1]) / d_out;
            let accel = if t >= 2.0 * d_out { (rate - prev_rate) / d_out } else { 0.0 };
            let rate = if t >= d_out { rate } else { 0.0 };
            s.history = [wheel_ref, s.history[0]];
            s.wheel_ref = wheel_ref;
            s.wheel_ref_rate = rate;
            s.target = desired_joint_traj(wheel_ref, rate, accel, &cfg.arm, cfg.wheel.radius)?;
            s.target_time = t;
            Ok(())
        };
        inner().map_err(wrap(t))
    };

    let inner = |t: f64, s: &mut RunState, row: &mut [f64]| -> Result<()> {
        let contact = plant.contact(&s.plant);
        // joint target extrapolated from the last outer update
        let mut target = s.target;
        let lag = t - s.target_time;
        for i in 0..4 {
            target.q[i] += target.qd[i] * lag;
        }
        let cmd = driver_command(&s.plant, &contact, &target, s.wheel_ref, &gains, &cfg.arm);
        let angle = s.plant.wheel.angle;
        let t_ads = ads_torque(angle, s.ads_ref, &cfg.ads);
        let t_sw = self_align_torque(angle, s.plant.wheel.rate, s.wheel_ref_rate, &cfg.wheel);
        s.max_residual = s.max_residual.max(cmd.identity_residual);
        let tangential = contact.tangential();

        let v = &s.vehicle;
        row[slots.x] = v.x;
        row[slots.y] = v.y;
        row[slots.psi] = v.psi;
        row[slots.r] = v.r;
        row[slots.v_y] = v.v_y;
        row[slots.speed] = v.speed;
        row[slots.y_ref] = reference.lateral_at(t);
        row[slots.pedal] = s.pedal;
        row[slots.wheel_ref] = s.wheel_ref;
        row[slots.ads_ref] = s.ads_ref;
        row[slots.angle] = angle;
        row[slots.rate] = s.plant.wheel.rate;
        row[slots.t_ads] = t_ads;
        row[slots.t_hm] = contact.hand_torque;
        row[slots.t_sw] = t_sw;
        row[slots.f_des] = cmd.desired_force;
        row[slots.f_left] = tangential[0];
        row[slots.f_right] = tangential[1];
        for i in 0..4 {
            row[slots.q + i] = s.plant.arm.q[i];
            row[slots.qd + i] = s.plant.arm.qd[i];
            row[slots.tau + i] = cmd.tau[i];
        }
        row[slots.residual] = cmd.identity_residual;

        let mut step = || -> Result<()> {
            crate::arm::check_mass_matrix(&s.plant.arm, &cfg.arm)?;
            let next = plant.step(&s.plant, &cmd.tau, t_ads, s.wheel_ref_rate, dt);
            let moved = step_lateral(&s.vehicle, angle, &cfg.vehicle, dt)?;
            s.vehicle = step_longitudinal(&moved, s.pedal, &cfg.vehicle, dt)?;
            s.plant = next;
            Ok(())
        };
        step().map_err(wrap(t))
    };

    let log = run_loop(&clock, &mut state, log, outer, inner).map_err(|e| match e {
        e @ Error::Scenario { .. } => e,
        other => {
            let t = match &other {
                Error::NonFinite { t, .. } => *t,
                _ => f64::NAN,
            };
            wrap(t)(other)
        }
    })?;

    let window = cfg.analysis_window()?;
    let performance = PerformanceReport::from_log(&log, &reference, &window, cfg.ads.max_torque)?;
    let workload = WorkloadReport::from_log(&log, &window, &hold, &cfg.metrics, cfg.condition.label(), cfg.mode)?;
    Ok(ScenarioOutput {
        report: ScenarioReport {
            condition: cfg.condition.label().to_string(),
            mode: cfg.mode.label().to_string(),
            seed: cfg.seed,
            performance,
            workload,
            max_identity_residual: state.max_residual,
        },
        log,
        reference,
    })
}

/// Writes `log.csv`, `report.json` and `effective_config.json` into `dir`.
pub fn write_outputs(cfg: &ScenarioConfig, out: &ScenarioOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = std::fs::File::create(dir.join("log.csv"))?;
    out.log.write_csv(std::io::BufWriter::new(file))?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&out.report)? + "\n")?;
    std::fs::write(dir.join("effective_config.json"), cfg.to_json()? + "\n")?;
    Ok(())
}

/// Result of one sweep cell. `error` is set when the run failed.
#[derive(Debug, Serialize)]
pub struct SweepCell {
    pub condition: Condition,
    pub mode: DriverMode,
    pub report: Option<ScenarioReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub output: Option<ScenarioOutput>,
}

/// Runs every condition for both driver modes, in parallel. Cells are
/// returned in condition-major order; a failing cell does not stop the rest.
pub fn run_sweep(base: &ScenarioConfig) -> Vec<SweepCell> {
    let cells: Vec<(Condition, DriverMode)> = Condition::ALL
        .into_iter()
        .flat_map(|c| DriverMode::ALL.into_iter().map(move |m| (c, m)))
        .collect();
    cells
        .into_par_iter()
        .map(|(condition, mode)| {
            let cfg = base.clone().with_cell(condition, mode);
            match run_scenario(&cfg) {
                Ok(out) => SweepCell {
                    condition,
                    mode,
                    report: Some(out.report.clone()),
                    error: None,
                    output: Some(out),
                },
                Err(e) => SweepCell {
                    condition,
                    mode,
                    report: None,
                    error: Some(e.to_string()),
                    output: None,
                },
            }
        })
        .collect()
}

/// Channels kept in the per-figure tidy export, decimated to the outer rate.
pub const FIGURE_CHANNELS: [&str; 8] = [
    "y",
    "y_ref",
    "delta_sw",
    "T_ADS",
    "T_hm",
    "tau_right_shoulder",
    "tau_right_elbow",
    "F_hand_right",
];

/// Writes `table3.csv`, `sweep.json` and `figures.csv` (long format:
/// condition, mode, time, channel, value) into `dir`.
pub fn write_sweep(cells: &[SweepCell], every: usize, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let table: Vec<crate::metrics::TableCell<'_>> = cells
        .iter()
        .map(|c| crate::metrics::TableCell {
            condition: c.condition.label(),
            mode: c.mode.label(),
            workload: c.report.as_ref().map(|r| &r.workload),
        })
        .collect();
    let file = std::fs::File::create(dir.join("table3.csv"))?;
    crate::metrics::write_workload_table(&table, std::io::BufWriter::new(file))?;
    std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(cells)? + "\n")?;

    let file = std::fs::File::create(dir.join("figures.csv"))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["condition", "mode", "time", "channel", "value"])?;
    for cell in cells {
        let Some(out) = &cell.output else { continue };
        let t = out.log.time();
        for name in FIGURE_CHANNELS {
            let v = out.log.channel(name)?;
            for k in (0..t.len()).step_by(every.max(1)) {
                w.write_record([
                    cell.condition.label(),
                    cell.mode.label(),
                    &format!("{:.6}", t[k]),
                    name,
                    &format!("{:.9e}", v[k]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-joint posture and gravity-hold torque of the initial hold posture.
pub fn initial_hold(cfg: &ScenarioConfig) -> Result<([f64; 4], [f64; 4])> {
    let q = posture(&cfg.arm, cfg.wheel.radius, 0.0)?;
    Ok((q, nominal_torque(&cfg.arm, &q)))
}
