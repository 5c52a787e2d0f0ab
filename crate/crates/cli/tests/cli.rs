use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tripletsim::cli_io::{ingest, ExperimentKind};

fn sim(args: &[&str]) -> Output {
    sim_in(args, None, &[])
}

fn sim_in(args: &[&str], dir: Option<&Path>, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sim"));
    cmd.args(args);
    if let Some(d) = dir {
        cmd.current_dir(d);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no JSON error on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

fn data_rows(csv: &[u8]) -> Vec<String> {
    String::from_utf8_lossy(csv)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn help_lists_every_kind() {
    let out = sim(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for k in ExperimentKind::ALL {
        assert!(text.contains(k.name()), "{} missing from help", k.name());
        assert!(text.contains(k.description()));
    }
}

#[test]
fn csv_rows_match_header() {
    let out = sim(&["t1", "--set", "t1.points=17"]);
    assert!(out.status.success());
    let rows = data_rows(&out.stdout);
    let width = rows[0].split(',').count();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r.split(',').count() == width));
}

#[test]
fn unknown_key_is_a_config_error() {
    let out = sim(&["rabi", "--set", "rabi.not_a_key=3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["exit_code"], 1);
    assert!(err["message"].as_str().unwrap().contains("not_a_key"));
}

#[test]
fn zfs_constraint_violation_exits_1() {
    let out = sim(&["spectrum", "--set", "system.zfs.e_mhz=-2500"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "config");
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    for args in [
        vec!["t1", "--config", "bad.json"],
        vec!["t1", "--config", "absent.json"],
        vec!["t1", "--set", "t1.points"],
        vec!["t1", "--set", "t1.points=\"many\""],
        vec!["no-such-kind"],
    ] {
        let out = sim_in(&args, Some(dir.path()), &[]);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert_eq!(stderr_json(&out)["exit_code"], 1);
    }
}

#[test]
fn flat_fit_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("flat.csv"),
        "x[s],y[1]\n0,1\n1,1\n2,1\n3,1\n",
    )
    .unwrap();
    let out = sim_in(
        &["fit", "--set", "fit.input=\"flat.csv\""],
        Some(dir.path()),
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "flat-data");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn flags_override_file_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"kind": "t1", "t1": {"points": 7}}"#,
    )
    .unwrap();
    let count = |args: &[&str]| {
        let out = sim_in(args, Some(dir.path()), &[]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        data_rows(&out.stdout).len() - 1
    };
    let default = count(&["t1"]);
    assert_ne!(default, 7);
    assert_eq!(count(&["t1", "--config", "cfg.json"]), 7);
    assert_eq!(
        count(&["t1", "--config", "cfg.json", "--set", "t1.points=3"]),
        3
    );
}

#[test]
fn seed_flag_wins_over_set() {
    let a = sim(&[
        "odmr",
        "--set",
        "system.count_noise=0.02",
        "--set",
        "seed=1",
        "--seed",
        "5",
    ]);
    let b = sim(&["odmr", "--set", "system.count_noise=0.02", "--seed", "5"]);
    let c = sim(&["odmr", "--set", "system.count_noise=0.02", "--seed", "6"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(data_rows(&a.stdout), data_rows(&c.stdout));
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let cases: [&[&str]; 3] = [
        &["odmr", "--set", "system.count_noise=0.02", "--seed", "11"],
        &["ac-sense", "--seed", "3", "--format", "json"],
        &["t1", "--set", "t1.noise=0.01", "--seed", "9"],
    ];
    for args in cases {
        let one = sim_in(args, None, &[("RAYON_NUM_THREADS", "1")]);
        let four = sim_in(args, None, &[("RAYON_NUM_THREADS", "4")]);
        let again = sim_in(args, None, &[("RAYON_NUM_THREADS", "4")]);
        assert!(one.status.success());
        assert_eq!(one.stdout, four.stdout, "{args:?}");
        assert_eq!(four.stdout, again.stdout, "{args:?}");
    }
}

#[test]
fn output_file_is_replaced_whole() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    std::fs::write(&path, "stale").unwrap();
    let out = sim_in(&["rabi", "-o", "trace.csv"], Some(dir.path()), &[]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read(&path).unwrap();
    assert_eq!(written, sim(&["rabi"]).stdout);
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(names.len(), 1, "temporary file left behind");

    // a failed run leaves the previous output untouched
    let out = sim_in(
        &["rabi", "-o", "trace.csv", "--set", "rabi.points=0"],
        Some(dir.path()),
        &[],
    );
    assert!(!out.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), written);
}

#[test]
fn trace_file_round_trips_through_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim_in(
        &[
            "t1",
            "--set",
            "t1.points=200",
            "--set",
            "t1.delay_max_us=2500",
            "-o",
            "t1.csv",
        ],
        Some(dir.path()),
        &[],
    );
    assert!(out.status.success());
    let bytes = std::fs::read(dir.path().join("t1.csv")).unwrap();
    let record = ingest(&bytes).unwrap();
    assert_eq!(record.rows.len(), 200);

    // ingested numbers reproduce the printed text exactly
    let printed: Vec<f64> = data_rows(&bytes)[1..]
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(printed, record.column(1));

    let out = sim_in(
        &[
            "fit",
            "--format",
            "json",
            "--set",
            "fit.input=\"t1.csv\"",
            "--set",
            "fit.model=\"triple-exponential\"",
            "--set",
            "fit.x_column=\"delay\"",
            "--set",
            "fit.y_column=\"signal\"",
        ],
        Some(dir.path()),
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let values: Vec<f64> = v["rows"][0]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    // delays are in µs; components come back sorted by lifetime
    let want = [0.0, 0.538, 21.2, 0.199, 111.0, 0.263, 514.0];
    for (g, w) in values.iter().zip(want).skip(1) {
        assert!((g / w - 1.0).abs() < 1e-3, "{values:?}");
    }
}
