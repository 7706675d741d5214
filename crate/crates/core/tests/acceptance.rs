//! Exit criteria for the simulator. Each test prints one PASS/FAIL line.

use std::collections::HashMap;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shared_steer::arm::{
    arm_forward_dynamics, kinetic_energy, nominal_torque, posture, ArmParams, ArmState, DriverMode, Vec2,
    GRAVITY_HOLD_TARGET, RIGHT_SHOULDER,
};
use shared_steer::ident::{fit_second_order, generate_excitation, run_impedance_trial, ImpedanceTrial, TrialSetup};
use shared_steer::metrics::{actuation_effort, EffortIntegrand, Window};
use shared_steer::scenario::{run_scenario, run_sweep, Condition, ScenarioConfig, ScenarioReport, SweepCell};
use shared_steer::steering::WheelParams;
use shared_steer::vehicle::{step_lateral, VehicleParams, VehicleState};

fn verdict(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {tag} {name}: {}", detail.as_ref());
    assert!(pass, "criterion {id} ({name}) failed: {}", detail.as_ref());
}

struct Sweep {
    cells: Vec<SweepCell>,
    elapsed: Duration,
}

impl Sweep {
    fn report(&self, condition: Condition, mode: DriverMode) -> &ScenarioReport {
        self.cells
            .iter()
            .find(|c| c.condition == condition && c.mode == mode)
            .and_then(|c| c.report.as_ref())
            .unwrap_or_else(|| panic!("cell {condition}/{mode:?} failed"))
    }

    fn by_condition<F: Fn(&ScenarioReport) -> f64>(&self, mode: DriverMode, f: F) -> HashMap<Condition, f64> {
        Condition::ALL
            .into_iter()
            .map(|c| (c, f(self.report(c, mode))))
            .collect()
    }
}

fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let cells = run_sweep(&ScenarioConfig::default());
        let elapsed = start.elapsed();
        for c in &cells {
            if let Some(e) = &c.error {
                panic!("sweep cell {}/{:?} failed: {e}", c.condition, c.mode);
            }
        }
        Sweep { cells, elapsed }
    })
}

fn fmt_map(m: &HashMap<Condition, f64>) -> String {
    Condition::ALL
        .iter()
        .map(|c| format!("{c}={:.3}", m[c]))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_01_inverse_forward_identity() {
    let s = sweep();
    let worst = s
        .cells
        .iter()
        .filter_map(|c| c.report.as_ref())
        .map(|r| r.max_identity_residual)
        .fold(0.0, f64::max);
    // every logged sample of every run carries the per-step residual
    let logged = s
        .cells
        .iter()
        .filter_map(|c| c.output.as_ref())
        .flat_map(|o| o.log.channel("identity_residual").unwrap().iter().copied())
        .fold(0.0, f64::max);
    verdict(
        1,
        "inverse/forward identity",
        worst < 1e-9 && logged < 1e-9,
        format!("max residual {worst:.3e} rad/s^2 over 8 x 22 s runs (limit 1e-9)"),
    );
}

#[test]
fn criterion_02_energy_audit() {
    let params = ArmParams {
        g_eff: 0.0,
        elbow_limit_stiffness: 0.0,
        ..ArmParams::default()
    };
    let q0 = posture(&params, WheelParams::default().radius, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let mut s = ArmState::at_rest(q0);
        for v in &mut s.qd {
            *v = rng.random_range(-2.0..2.0);
        }
        let e0 = kinetic_energy(&s, &params);
        let dt = 1e-3;
        let free = [Vec2::zeros(); 2];
        for _ in 0..10_000 {
            s = arm_forward_dynamics(&s, &[0.0; 4], &free, &params, dt).unwrap();
        }
        let drift = ((kinetic_energy(&s, &params) - e0) / e0).abs() / 10.0;
        worst = worst.max(drift);
    }
    verdict(
        2,
        "passive arm energy audit",
        worst < 1e-6,
        format!("worst relative drift {worst:.3e} per s over 10 s (limit 1e-6)"),
    );
}

/// Known single-DOF plant driven by a zero-order-held torque, RK4.
fn simulate_plant(j: f64, b: f64, k: f64, torque: &[f64], dt: f64) -> Vec<f64> {
    let f = |x: [f64; 2], u: f64| [x[1], (u - b * x[1] - k * x[0]) / j];
    let mut x = [0.0, 0.0];
    let mut out = Vec::with_capacity(torque.len());
    for &u in torque {
        out.push(x[0]);
        let k1 = f(x, u);
        let k2 = f([x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]], u);
        let k3 = f([x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]], u);
        let k4 = f([x[0] + dt * k3[0], x[1] + dt * k3[1]], u);
        for i in 0..2 {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    out
}

#[test]
fn criterion_03_identification_oracle() {
    let start = Instant::now();
    let setup = TrialSetup::default();
    let torque = generate_excitation(11, setup.duration, setup.dt, setup.amplitude).unwrap();
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 20,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(&(0.01f64..=1.0, 0.1f64..=10.0, 1.0f64..=50.0), |(j, b, k)| {
        let theta = simulate_plant(j, b, k, &torque, setup.dt);
        let trial = ImpedanceTrial {
            dt: setup.dt,
            mode: DriverMode::Tense,
            seed: 11,
            torque: torque.clone(),
            theta,
        };
        let fit = fit_second_order(&trial, setup.cutoff_hz).unwrap();
        let err = [
            (fit.inertia - j).abs() / j,
            (fit.damping - b).abs() / b,
            (fit.stiffness - k).abs() / k,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst.set(worst.get().max(err));
        prop_assert!(err < 0.02, "({j}, {b}, {k}) -> {fit:?}");
        Ok(())
    });
    let elapsed = start.elapsed();
    verdict(
        3,
        "identification oracle",
        result.is_ok() && elapsed < Duration::from_secs(60),
        format!(
            "20 triples, worst relative error {:.3e} (limit 2e-2), {:.1} s (limit 60 s){}",
            worst.get(),
            elapsed.as_secs_f64(),
            result.err().map(|e| format!(", {e}")).unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_04_impedance_mode_ordering() {
    let setup = TrialSetup::default();
    let excitation = generate_excitation(0, setup.duration, setup.dt, setup.amplitude).unwrap();
    let mut peaks = HashMap::new();
    let mut fits = HashMap::new();
    for mode in DriverMode::ALL {
        let trial = run_impedance_trial(mode, &excitation, 0, &setup).unwrap();
        peaks.insert(mode, trial.theta.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        fits.insert(mode, fit_second_order(&trial, setup.cutoff_hz).unwrap());
    }
    let (t, r) = (&fits[&DriverMode::Tense], &fits[&DriverMode::Relaxed]);
    let pass = peaks[&DriverMode::Relaxed] > peaks[&DriverMode::Tense]
        && t.stiffness > r.stiffness
        && t.damping > r.damping;
    verdict(
        4,
        "impedance mode ordering",
        pass,
        format!(
            "peak theta relaxed {:.4} vs tense {:.4} rad; K {:.2} vs {:.2}; B {:.3} vs {:.3} (tense vs relaxed)",
            peaks[&DriverMode::Relaxed],
            peaks[&DriverMode::Tense],
            t.stiffness,
            r.stiffness,
            t.damping,
            r.damping
        ),
    );
}

#[test]
fn criterion_05_ads_saturation() {
    let s = sweep();
    let limit = 5.0;
    let bound_ok = s.cells.iter().all(|c| {
        c.output
            .as_ref()
            .unwrap()
            .log
            .channel("T_ADS")
            .unwrap()
            .iter()
            .all(|v| v.abs() <= limit)
    });
    let mut pass = bound_ok;
    let mut detail = vec![format!("|T_ADS| <= {limit} everywhere: {bound_ok}")];
    for mode in DriverMode::ALL {
        for c in [Condition::NoConflict, Condition::ConflictI, Condition::ConflictII] {
            let p = &s.report(c, mode).performance;
            let want = c != Condition::NoConflict;
            pass &= p.ads_saturated == want;
            detail.push(format!(
                "{c}/{}: saturated={} (want {want}, peak {:.3})",
                mode.label(),
                p.ads_saturated,
                p.peak_ads_torque
            ));
        }
    }
    verdict(5, "automation torque saturation", pass, detail.join("; "));
}

#[test]
fn criterion_06_driver_torque_ordering() {
    let s = sweep();
    let mut pass = true;
    let mut detail = Vec::new();
    for mode in DriverMode::ALL {
        let m = s.by_condition(mode, |r| r.performance.peak_hand_torque);
        let ok = m[&Condition::ConflictI] > m[&Condition::ConflictII]
            && m[&Condition::ConflictII] > m[&Condition::Manual]
            && m[&Condition::Manual] > m[&Condition::NoConflict];
        pass &= ok;
        detail.push(format!("{}: {} ordered={ok}", mode.label(), fmt_map(&m)));
    }
    let mc = s.report(Condition::Manual, DriverMode::Tense).performance.peak_hand_torque;
    let anchored = (1.0..=6.0).contains(&mc);
    pass &= anchored;
    detail.push(format!("MC/Tense peak {mc:.3} in [1, 6]: {anchored}"));
    verdict(6, "driver torque ordering", pass, detail.join("; "));
}

#[test]
fn criterion_07_lateral_error_ordering() {
    let s = sweep();
    let mut pass = true;
    let mut detail = Vec::new();
    for mode in DriverMode::ALL {
        let m = s.by_condition(mode, |r| r.performance.peak_lateral_error);
        let ci = m[&Condition::ConflictI];
        let cii = m[&Condition::ConflictII];
        let largest = Condition::ALL.iter().all(|c| *c == Condition::ConflictI || ci > m[c]);
        let smallest = Condition::ALL.iter().all(|c| *c == Condition::ConflictII || cii < m[c]);
        let mut ok = largest && smallest;
        if mode == DriverMode::Relaxed {
            ok &= m[&Condition::NoConflict] <= m[&Condition::Manual];
        }
        pass &= ok;
        detail.push(format!("{}: {} ok={ok}", mode.label(), fmt_map(&m)));
    }
    verdict(7, "lateral error ordering", pass, detail.join("; "));
}

#[test]
fn criterion_08_workload_ordering() {
    let s = sweep();
    let shoulder = |r: &ScenarioReport| r.workload.joint("right_shoulder").unwrap().clone();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, pick) in [
        ("stress", (|j: &shared_steer::metrics::JointWorkload| j.control_stress) as fn(&_) -> f64),
        ("load", |j| j.control_load_quantity),
    ] {
        for mode in DriverMode::ALL {
            let m = s.by_condition(mode, |r| pick(&shoulder(r)));
            let ci = m[&Condition::ConflictI];
            let nc = m[&Condition::NoConflict];
            let top = Condition::ALL.iter().all(|c| *c == Condition::ConflictI || ci > m[c]);
            let bottom = Condition::ALL.iter().all(|c| *c == Condition::NoConflict || nc < m[c]);
            pass &= top && bottom;
            detail.push(format!("{name} {}: {} CI top={top} NC bottom={bottom}", mode.label(), fmt_map(&m)));
        }
        for c in Condition::ALL {
            let tense = pick(&shoulder(s.report(c, DriverMode::Tense)));
            let relaxed = pick(&shoulder(s.report(c, DriverMode::Relaxed)));
            let ok = relaxed <= tense;
            pass &= ok;
            if !ok {
                detail.push(format!("{name} {c}: relaxed {relaxed:.3} > tense {tense:.3}"));
            }
        }
    }
    verdict(8, "workload ordering (right shoulder)", pass, detail.join("; "));
}

#[test]
fn criterion_09_gravity_hold_calibration() {
    let mut params = ArmParams::default();
    let radius = WheelParams::default().radius;
    params.g_eff = params.calibrated_gravity(radius, GRAVITY_HOLD_TARGET).unwrap();
    let q = posture(&params, radius, 0.0).unwrap();
    let hold = nominal_torque(&params, &q)[RIGHT_SHOULDER];
    let calibrated = (hold - 9.4).abs() <= 0.2 * 9.4;
    let t: Vec<f64> = (0..22_000).map(|k| k as f64 * 1e-3).collect();
    let effort = actuation_effort(&t, &vec![9.4; t.len()], &Window::new(2.0, 22.0).unwrap(), EffortIntegrand::Absolute);
    let exact = (effort - 188.0).abs() < 1e-9;
    verdict(
        9,
        "gravity hold calibration",
        calibrated && exact,
        format!("g_eff {:.4} m/s^2, right shoulder hold {hold:.4} N m, effort {effort:.9} N m s", params.g_eff),
    );
}

#[test]
fn criterion_10_vehicle_steady_state() {
    let p = VehicleParams::default();
    let steer = 0.5;
    let mut detail = Vec::new();
    let mut pass = true;
    for speed in [10.0, 20.0, 30.0] {
        let mut s = VehicleState::cruising(speed);
        for _ in 0..20_000 {
            s = step_lateral(&s, steer, &p, 1e-3).unwrap();
        }
        // closed form written out from the axle force balance
        let l = p.l_f + p.l_r;
        let k_us = p.mass * (p.l_r * p.c_r - p.l_f * p.c_f) / (l * p.c_f * p.c_r);
        let analytic = speed * (steer / p.steer_ratio) / (l + k_us * speed * speed);
        let rel = (s.r - analytic).abs() / analytic;
        pass &= rel < 0.01;
        detail.push(format!("V={speed}: r {:.6} vs {analytic:.6} ({rel:.2e})", s.r));
    }
    verdict(10, "vehicle steady-state yaw rate", pass, detail.join("; "));
}

#[test]
fn criterion_11_performance() {
    let start = Instant::now();
    let cfg = ScenarioConfig::for_cell(Condition::ConflictI, DriverMode::Tense);
    run_scenario(&cfg).unwrap();
    let single = start.elapsed();
    let s = sweep();
    verdict(
        11,
        "runtime",
        single < Duration::from_secs(60) && s.elapsed < Duration::from_secs(300),
        format!(
            "single 22 s run {:.2} s (limit 60 s), 8-cell sweep {:.2} s (limit 300 s)",
            single.as_secs_f64(),
            s.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_12_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"condition": "ConflictII", "mode": "Relaxed", "seed": 42}"#).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_shared-steer"))
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("log.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    verdict(
        12,
        "determinism",
        !a.is_empty() && a == b,
        format!("two invocations, log.csv {} bytes, identical={}", a.len(), a == b),
    );
}
