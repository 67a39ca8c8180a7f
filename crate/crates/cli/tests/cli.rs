//! End-to-end runs of the subcommands through `run_from`.

use std::fs;
use std::path::{Path, PathBuf};

use rtsched_cli::run_from;
use tempfile::TempDir;

fn run(args: &[&str]) -> u8 {
    let mut v = vec!["rtsched"];
    v.extend_from_slice(args);
    run_from(v)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV file: comment lines and the header row skipped.
fn data_rows(p: &Path) -> Vec<String> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

/// Arrivals and calendar for January 2020.
fn january(tmp: &TempDir) -> PathBuf {
    let dir = tmp.path().join("gen");
    let code = run(&["gen", "--out", s(&dir), "--start", "2020-01-01", "--end", "2020-01-31"]);
    assert_eq!(code, 0);
    dir
}

fn fortnight_args(gen: &Path) -> Vec<String> {
    vec![
        "--arrivals".into(),
        s(&gen.join("arrivals.csv")).into(),
        "--calendar".into(),
        s(&gen.join("calendar.csv")).into(),
        "--sim-end".into(),
        "2020-01-14".into(),
        "--comparison-start".into(),
        "2020-01-01".into(),
    ]
}

fn run_with(common: &[String], args: &[&str]) -> u8 {
    let mut v: Vec<&str> = common.iter().map(String::as_str).collect();
    v.extend_from_slice(args);
    run(&v)
}

#[test]
fn generation_is_reproducible_and_follows_the_priority_mix() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["gen", "--out", s(&a)]), 0);
    assert_eq!(run(&["gen", "--out", s(&b)]), 0);
    for f in ["arrivals.csv", "calendar.csv", "calibration.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let cal: serde_json::Value = serde_json::from_slice(&fs::read(a.join("calibration.json")).unwrap()).unwrap();
    let shares = &cal["calibration"]["priority"];
    for (p, target) in [("A", 0.37), ("B", 0.16), ("C", 0.47)] {
        let got = shares[p]["observed"].as_f64().unwrap();
        assert!((got - target).abs() <= 0.03, "{p}: {got}");
    }
    assert!(cal["run_config"].is_object());
}

#[test]
fn zero_rate_gives_an_empty_arrival_file() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    assert_eq!(run(&["gen", "--out", s(&out), "--rate", "0", "--end", "2020-01-31"]), 0);
    assert!(data_rows(&out.join("arrivals.csv")).is_empty());
}

#[test]
fn fortnight_simulation_is_clean_and_reports_both_schedulers() {
    let tmp = TempDir::new().unwrap();
    let gen = january(&tmp);
    let out = tmp.path().join("sim");
    let common = fortnight_args(&gen);
    assert_eq!(run_with(&common, &["simulate", "--out", s(&out), "--baseline"]), 0);
    assert!(data_rows(&out.join("violations.csv")).is_empty());
    assert!(!data_rows(&out.join("schedule.csv")).is_empty());
    let long = data_rows(&out.join("report_long.csv"));
    for label in ["dynamic", "baseline"] {
        assert!(long.iter().any(|l| l.starts_with(&format!("{label},"))), "{label}");
    }
    let schedule = fs::read_to_string(out.join("schedule.csv")).unwrap();
    assert!(schedule.starts_with("# run_config: {"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["violation_errors"], 0);
    assert!(out.join("baseline_schedule.csv").exists());

    // The exported schedule passes the standalone audit and can be measured.
    let sched = out.join("schedule.csv");
    assert_eq!(run_with(&common, &["validate", "--schedule", s(&sched)]), 0);
    assert_eq!(run_with(&common, &["validate", "--schedule", s(&sched), "--sample", "15"]), 0);
    let m = tmp.path().join("metrics");
    assert_eq!(run_with(&common, &["metrics", "--schedule", s(&sched), "--out", s(&m)]), 0);
    assert_eq!(
        data_rows(&m.join("course_metrics.csv")),
        data_rows(&out.join("course_metrics.csv"))
    );
}

#[test]
fn a_shortened_fraction_is_one_violation_and_exit_1() {
    let tmp = TempDir::new().unwrap();
    let gen = january(&tmp);
    let out = tmp.path().join("sim");
    let common = fortnight_args(&gen);
    assert_eq!(run_with(&common, &["simulate", "--out", s(&out)]), 0);
    let text = fs::read_to_string(out.join("schedule.csv")).unwrap();
    let mut done = false;
    let mutated: Vec<String> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if !done && f.len() == 8 && f[1] == "2" && f[6] == "15" {
                done = true;
                format!("{},{},{},{},{},{},10,{}", f[0], f[1], f[2], f[3], f[4], f[5], f[7])
            } else {
                l.to_owned()
            }
        })
        .collect();
    assert!(done);
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, mutated.join("\n")).unwrap();
    let v = tmp.path().join("val");
    assert_eq!(run_with(&common, &["validate", "--schedule", s(&bad), "--out", s(&v)]), 1);
    let rows = data_rows(&v.join("violations.csv"));
    assert_eq!(rows.len(), 1, "{rows:?}");
    assert!(rows[0].starts_with("fraction_duration,error,"));
}

#[test]
fn resuming_a_snapshot_reproduces_the_full_run() {
    let tmp = TempDir::new().unwrap();
    let gen = january(&tmp);
    let common = fortnight_args(&gen);
    let full = tmp.path().join("full");
    assert_eq!(run_with(&common, &["simulate", "--out", s(&full)]), 0);
    let snap = tmp.path().join("state.json");
    assert_eq!(
        run_with(&common, &["simulate", "--out", s(&full), "--snapshot", s(&snap), "--stop-after", "2020-01-08"]),
        0
    );
    let resumed = tmp.path().join("resumed");
    assert_eq!(run(&["simulate", "--out", s(&resumed), "--resume", s(&snap)]), 0);
    for f in ["schedule.csv", "trace.csv", "report_long.csv", "report.json"] {
        assert_eq!(fs::read(full.join(f)).unwrap(), fs::read(resumed.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_input_exits_2_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let missing = tmp.path().join("none.csv");
    assert_eq!(run(&["--arrivals", s(&missing), "simulate", "--out", s(&out)]), 2);
    assert!(!out.exists());
    assert_eq!(run(&["simulate", "--out", s(&out)]), 2);
    assert!(!out.exists());
}

#[test]
fn bad_configuration_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"trim": 0.7}"#).unwrap();
    assert_eq!(run(&["--config", s(&cfg), "oracle", "--n", "1"]), 2);
    fs::write(&cfg, "{not json").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "oracle", "--n", "1"]), 2);
    assert_eq!(run(&["simulate"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn oracle_rows_and_size_limits() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("oracle.csv");
    assert_eq!(run(&["--seed", "0", "oracle", "--n", "4", "--out", s(&out)]), 0);
    assert_eq!(data_rows(&out).len(), 4);
    let empty = tmp.path().join("empty.csv");
    assert_eq!(run(&["oracle", "--n", "0", "--out", s(&empty)]), 0);
    assert!(data_rows(&empty).is_empty());
    assert_eq!(run(&["oracle", "--n", "1", "--courses", "7"]), 2);
}
