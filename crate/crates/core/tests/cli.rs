use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shared-steer"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn rejects_bad_input_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    std::fs::write(dir.path().join("unknown.json"), r#"{"no_such_field": 1}"#).unwrap();
    std::fs::write(dir.path().join("negative.json"), r#"{"clock": {"dt_inner": -0.001}}"#).unwrap();
    for args in [
        vec!["simulate", "--config", "missing.json"],
        vec!["simulate", "--config", "broken.json"],
        vec!["simulate", "--config", "unknown.json"],
        vec!["simulate", "--config", "negative.json"],
        vec!["simulate", "--condition", "Sideways"],
        vec!["identify", "--mode", "Sleepy"],
        vec!["reference"],
    ] {
        let out = run(&args, dir.path());
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty(), "{args:?} should explain the failure");
    }
}

#[test]
fn reference_csv_round_trips_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reference", "--out", "ref/overtake.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("ref/overtake.csv");
    assert_eq!(first_line(&csv), "t,v_ref,y_ref");

    std::fs::write(
        dir.path().join("ref/config.json"),
        r#"{"condition": "NoConflict", "mode": "Tense", "reference": {"csv": "overtake.csv"}}"#,
    )
    .unwrap();
    let from_csv = run(&["simulate", "--config", "ref/config.json", "--out", "a"], dir.path());
    assert!(from_csv.status.success(), "{}", String::from_utf8_lossy(&from_csv.stderr));
    let synthetic = run(&["simulate", "--condition", "NoConflict", "--mode", "Tense", "--out", "b"], dir.path());
    assert!(synthetic.status.success());

    let ya = std::fs::read_to_string(dir.path().join("a/log.csv")).unwrap();
    let yb = std::fs::read_to_string(dir.path().join("b/log.csv")).unwrap();
    assert_eq!(ya.lines().next(), yb.lines().next());
    assert_eq!(ya.lines().count(), yb.lines().count());
}

#[test]
fn identify_writes_trial_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("setup.json"), r#"{"duration": 4.0}"#).unwrap();
    let out = run(
        &["identify", "--mode", "Relaxed", "--seed", "3", "--setup", "setup.json", "--out", "id"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&dir.path().join("id/trial.csv")), "t,torque,theta");
    let fit: BTreeMap<String, f64> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("id/fit.json")).unwrap()).unwrap();
    assert_eq!(fit.keys().cloned().collect::<Vec<_>>(), ["B", "J", "K", "residual"]);
    assert!(fit.values().all(|v| v.is_finite()));
    assert!(fit["K"] > 0.0 && fit["J"] > 0.0);
}

#[test]
fn sweep_writes_table_with_rank_permutations() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "--out", "sw"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["table3.csv", "sweep.json", "figures.csv"] {
        assert!(dir.path().join("sw").join(name).is_file(), "{name}");
    }
    let mut rdr = csv::Reader::from_path(dir.path().join("sw/table3.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["joint", "indicator", "unit", "condition", "mode", "value", "rank"]
    );
    let mut groups: BTreeMap<(String, String), Vec<u32>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        groups
            .entry((rec[0].to_string(), rec[1].to_string()))
            .or_default()
            .push(rec[6].parse().unwrap());
    }
    assert_eq!(groups.len(), 4 * 3);
    for (key, mut ranks) in groups {
        ranks.sort_unstable();
        assert_eq!(ranks, (1..=8).collect::<Vec<_>>(), "{key:?}");
    }
}
