//! Equivalent arm impedance at the wheel: torque-pulse trials on the two-arm
//! model holding a massless, spring-free wheel, and a least-squares fit of
//! the single-DOF model `J theta'' + B theta' + K theta = T`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmParams, DriverGains, DriverMode, HandCoupling, JointTarget};
use crate::error::{Error, Result};
use crate::plant::{driver_command, settled_state, Plant};
use crate::steering::WheelParams;

/// Seeded train of rectangular torque pulses. Pulses come in pairs of equal
/// width and opposite sign separated by rests, so the series sums to zero.
pub fn generate_excitation(seed: u64, duration: f64, dt: f64, amplitude: f64) -> Result<Vec<f64>> {
    if !(duration > 0.0 && dt > 0.0 && duration.is_finite() && dt.is_finite()) {
        return Err(Error::InvalidConfig("excitation duration and dt must be positive".into()));
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidConfig("excitation amplitude must be >= 0".into()));
    }
    let n = (duration / dt).round() as usize;
    let mut out = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = |s: f64| ((s / dt).round() as usize).max(1);
    let mut k = 0;
    loop {
        let rest_a = samples(rng.random_range(0.3..0.8));
        let rest_b = samples(rng.random_range(0.3..0.8));
        let width = samples(rng.random_range(0.2..=0.6));
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let first = k + rest_a;
        let second = first + width + rest_b;
        if second + width > n {
            break;
        }
        out[first..first + width].fill(sign * amplitude);
        out[second..second + width].fill(-sign * amplitude);
        k = second + width;
    }
    Ok(out)
}

/// Torque input and wheel-angle response of one trial. `torque[k]` acts over
/// `[k dt, (k+1) dt)`; `theta[k]` is sampled at `k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceTrial {
    pub dt: f64,
    pub mode: DriverMode,
    pub seed: u64,
    pub torque: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ImpedanceTrial {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,torque,theta")?;
        for (k, (u, th)) in self.torque.iter().zip(&self.theta).enumerate() {
            writeln!(w, "{:.9e},{:.9e},{:.9e}", k as f64 * self.dt, u, th)?;
        }
        Ok(())
    }
}

/// Trial rig. The wheel is given a token inertia and no stiffness or damping;
/// the physics runs `substeps` times faster than the recording rate to stay
/// stable with that light wheel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSetup {
    pub arm: ArmParams,
    pub hand: HandCoupling,
    pub wheel_inertia: f64,
    pub wheel_radius: f64,
    pub substeps: usize,
    pub duration: f64,
    pub dt: f64,
    pub amplitude: f64,
    pub cutoff_hz: f64,
}

impl Default for TrialSetup {
    fn default() -> Self {
        Self {
            arm: ArmParams::default(),
            hand: HandCoupling::default(),
            wheel_inertia: 1e-4,
            wheel_radius: WheelParams::default().radius,
            substeps: 50,
            duration: 10.0,
            dt: 1e-3,
            amplitude: 3.0,
            cutoff_hz: 20.0,
        }
    }
}

impl TrialSetup {
    pub fn validate(&self) -> Result<()> {
        self.arm.validate(self.wheel_radius)?;
        self.hand.validate()?;
        if !(self.wheel_inertia > 0.0 && self.wheel_radius > 0.0 && self.substeps > 0 && self.dt > 0.0) {
            return Err(Error::InvalidConfig("trial setup values must be positive".into()));
        }
        if !(self.duration > 0.0 && self.cutoff_hz > 0.0 && self.cutoff_hz < 0.5 / self.dt) {
            return Err(Error::InvalidConfig("trial duration/cutoff out of range".into()));
        }
        Ok(())
    }

    fn wheel(&self) -> WheelParams {
        WheelParams {
            inertia: self.wheel_inertia,
            stiffness: 0.0,
            damping: 0.0,
            radius: self.wheel_radius,
            ..WheelParams::default()
        }
    }
}

/// Applies `excitation` to the held wheel and records its angle. The driver
/// holds its initial posture: desired joint angles are the starting ones and
/// the desired wheel angle is zero.
pub fn run_impedance_trial(
    mode: DriverMode,
    excitation: &[f64],
    seed: u64,
    setup: &TrialSetup,
) -> Result<ImpedanceTrial> {
    setup.validate()?;
    let gains = DriverGains::for_mode(mode);
    let wheel = setup.wheel();
    let plant = Plant {
        arm: &setup.arm,
        wheel: &wheel,
        hand: &setup.hand,
    };
    let mut s = settled_state(&setup.arm, &wheel, 0.0)?;
    let target = JointTarget::hold(s.arm.q);
    let h = setup.dt / setup.substeps as f64;
    let mut theta = Vec::with_capacity(excitation.len());
    for (k, &torque) in excitation.iter().enumerate() {
        if !s.wheel.angle.is_finite() {
            return Err(Error::NonFinite {
                channel: "theta".into(),
                t: k as f64 * setup.dt,
            });
        }
        theta.push(s.wheel.angle);
        for _ in 0..setup.substeps {
            let c = plant.contact(&s);
            let cmd = driver_command(&s, &c, &target, 0.0, &gains, &setup.arm);
            s = plant.step(&s, &cmd.tau, torque, 0.0, h);
        }
    }
    Ok(ImpedanceTrial {
        dt: setup.dt,
        mode,
        seed,
        torque: excitation.to_vec(),
        theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceFit {
    /// kg m^2
    #[serde(rename = "J")]
    pub inertia: f64,
    /// N m s/rad
    #[serde(rename = "B")]
    pub damping: f64,
    /// N m/rad
    #[serde(rename = "K")]
    pub stiffness: f64,
    /// rms torque residual of the fitted model, N m
    pub residual: f64,
}

/// Second-order Butterworth low-pass run forward and backward.
pub fn zero_phase_lowpass(x: &[f64], cutoff_hz: f64, dt: f64) -> Vec<f64> {
    let k = (std::f64::consts::PI * cutoff_hz * dt).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
    let b0 = k * k * norm;
    let (b1, b2) = (2.0 * b0, b0);
    let a1 = 2.0 * (k * k - 1.0) * norm;
    let a2 = (1.0 - sqrt2 * k + k * k) * norm;

    let pass = |input: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(input.len());
        let (mut x1, mut x2) = (input[0], input[0]);
        let (mut y1, mut y2) = (input[0], input[0]);
        for &x0 in input {
            let y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            out.push(y0);
        }
        out
    };

    if x.is_empty() {
        return Vec::new();
    }
    // odd extension at both ends to tame start-up transients
    let pad = (3.0 / (cutoff_hz * dt)).ceil() as usize;
    let pad = pad.min(x.len() - 1);
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    let mut y = pass(&ext);
    y.reverse();
    let mut y = pass(&y);
    y.reverse();
    y[pad..pad + n].to_vec()
}

/// Least-squares fit of `(J, B, K)` from a trial, with derivatives taken by
/// central differences of the low-passed response.
pub fn fit_second_order(trial: &ImpedanceTrial, cutoff_hz: f64) -> Result<ImpedanceFit> {
    let n = trial.theta.len();
    if n != trial.torque.len() {
        return Err(Error::InvalidConfig("trial series lengths differ".into()));
    }
    if n < 1000 {
        return Err(Error::InvalidConfig(format!("trial too short: {n} samples, need >= 1000")));
    }
    if trial.theta.iter().chain(&trial.torque).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            channel: "trial".into(),
            t: f64::NAN,
        });
    }
    let dt = trial.dt;
    // torque centred on the sample instants: the second difference at k spans
    // the intervals k-1 and k
    let mut centred = Vec::with_capacity(n);
    centred.push(trial.torque[0]);
    centred.extend(trial.torque.windows(2).map(|w| 0.5 * (w[0] + w[1])));

    let theta = zero_phase_lowpass(&trial.theta, cutoff_hz, dt);
    let torque = zero_phase_lowpass(&centred, cutoff_hz, dt);

    let trim = (n / 50).max(50);
    let rows: Vec<usize> = (trim.max(1)..n - trim.max(1)).collect();
    let m = rows.len();
    let mut a = DMatrix::zeros(m, 3);
    let mut b = DVector::zeros(m);
    for (r, &k) in rows.iter().enumerate() {
        a[(r, 0)] = (theta[k + 1] - 2.0 * theta[k] + theta[k - 1]) / (dt * dt);
        a[(r, 1)] = (theta[k + 1] - theta[k - 1]) / (2.0 * dt);
        a[(r, 2)] = theta[k];
        b[r] = torque[k];
    }
    let scales: Vec<f64> = (0..3).map(|c| a.column(c).norm()).collect();
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::RankDeficient("response has no motion".into()));
    }
    let mut scaled = a.clone();
    for (c, s) in scales.iter().enumerate() {
        scaled.column_mut(c).unscale_mut(*s);
    }
    let svd = scaled.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!("singular values {smax:.3e} .. {smin:.3e}")));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let params = [x[0] / scales[0], x[1] / scales[1], x[2] / scales[2]];
    let fitted = &a * DVector::from_column_slice(&params);
    let residual = ((fitted - &b).norm_squared() / m as f64).sqrt();
    Ok(ImpedanceFit {
        inertia: params[0],
        damping: params[1],
        stiffness: params[2],
        residual,
    })
}
