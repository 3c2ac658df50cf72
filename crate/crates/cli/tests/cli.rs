use std::path::Path;
use std::process::{Command, Output};

use gpsfilt::trajectory;

fn gpsfilt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpsfilt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let out = gpsfilt(&["generate", "--n", "180", "--seed", "7", "--out", p(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("t,truth,measured"));
    assert_eq!(text.lines().count(), 181);
    assert_eq!(trajectory::load_csv(&path).unwrap().len(), 180);
}

#[test]
fn generate_is_reproducible() {
    let a = gpsfilt(&["generate", "--seed", "3", "--motion", "constant-velocity"]);
    let b = gpsfilt(&["generate", "--seed", "3", "--motion", "constant-velocity"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = gpsfilt(&["generate", "--seed", "4", "--motion", "constant-velocity"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn run_wiener_parallel_with_footer() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    gpsfilt(&["generate", "--seed", "7", "--out", p(&traj)]);
    let errors = dir.path().join("err.csv");
    let out = gpsfilt(&[
        "run", "--scheme", "wiener", "--length", "90", "--parallel", "3", "--in", p(&traj),
        "--errors", p(&errors),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,truth,measured,estimate");
    assert_eq!(lines.len(), 1 + 180 + 1);
    assert!(lines[181].starts_with("# scheme=wiener-par3(90) mean_abs="));

    let err = std::fs::read_to_string(&errors).unwrap();
    assert_eq!(err.lines().next(), Some("k,abs_error"));
    assert_eq!(err.lines().count(), 181);

    // serial and parallel agree on the series up to rounding
    let serial = stdout(&gpsfilt(&[
        "run", "--scheme", "wiener", "--length", "90", "--parallel", "1", "--in", p(&traj),
        "--format", "json",
    ]));
    let par = stdout(&gpsfilt(&[
        "run", "--scheme", "wiener-par3(90)", "--in", p(&traj), "--format", "json",
    ]));
    let a: serde_json::Value = serde_json::from_str(&serial).unwrap();
    let b: serde_json::Value = serde_json::from_str(&par).unwrap();
    for (x, y) in a["estimates"].as_array().unwrap().iter().zip(b["estimates"].as_array().unwrap()) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn run_mlp_scores_second_half() {
    let out = gpsfilt(&["run", "--scheme", "mlp", "--seed", "7", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["first_sample"], 90);
    assert_eq!(v["stats"]["count"], 90);
}

#[test]
fn freq_matches_table() {
    let out = gpsfilt(&["freq", "--t-ref", "16.9648", "--t-proc", "9.688", "--n", "90"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "12.37 kHz");
    let out = gpsfilt(&["freq", "--t-ref", "16.9648", "--t-proc", "25.2656", "--n", "180"]);
    assert_eq!(stdout(&out).trim(), "impossible");
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(gpsfilt(&[]).status.code(), Some(1));
    assert_eq!(gpsfilt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        gpsfilt(&["run", "--scheme", "kalman", "--parallel", "3"]).status.code(),
        Some(1)
    );
    assert_eq!(
        gpsfilt(&["run", "--scheme", "wiener", "--parallel", "4"]).status.code(),
        Some(1)
    );
    assert_eq!(gpsfilt(&["run", "--scheme", "bogus"]).status.code(), Some(1));
    // runtime errors
    let out = gpsfilt(&["run", "--scheme", "kalman", "--in", "/nonexistent/traj.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert!(out.stdout.is_empty());
    assert_eq!(
        gpsfilt(&["run", "--scheme", "wiener", "--length", "500"]).status.code(),
        Some(2)
    );
    assert_eq!(
        gpsfilt(&["freq", "--t-ref", "0", "--t-proc", "1", "--n", "5"]).status.code(),
        Some(2)
    );
    assert_eq!(gpsfilt(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "t,truth,measured\n0,1,1\n0.05,oops,1\n").unwrap();
    let out = gpsfilt(&["run", "--scheme", "kalman", "--in", p(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n = 60\nwiener.length = 30\n").unwrap();
    let out = gpsfilt(&["--config", p(&cfg), "run", "--scheme", "wiener", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["scheme"], "wiener(30)");
    assert_eq!(v["estimates"].as_array().unwrap().len(), 60);
}

#[test]
fn report_text_has_all_tables() {
    let out = gpsfilt(&["report", "--seed", "7", "--inject-published-times"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for heading in [
        "Precision",
        "Processing time",
        "Wiener variants",
        "Required sampling frequency",
    ] {
        assert!(text.contains(heading), "missing {heading}");
    }
    assert!(text.contains("1912.86"));
    assert!(text.contains("Impossible"));
}

#[test]
fn bench_reports_mac_counts() {
    let out = gpsfilt(&[
        "bench", "--seed", "7", "--reps", "5", "--format", "csv", "--scheme", "wiener(180)",
        "--scheme", "wiener-par3(180)",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("wiener(180),") && rows[1].ends_with(",180"));
    assert!(rows[2].starts_with("wiener-par3(180),") && rows[2].ends_with(",120"));
}

#[test]
fn emit_error_series_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    let truth = [1.0, 2.0, 3.0];
    gpsfilt_cli::emit_error_series(&truth, &truth, 0, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "k,abs_error\n0,0\n1,0\n2,0\n");

    let shifted = [3.0, 4.0, 5.0];
    gpsfilt_cli::emit_error_series(&shifted, &truth, 10, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "k,abs_error\n10,2\n11,2\n12,2\n");

    assert!(gpsfilt_cli::emit_error_series(&shifted, &truth[..2], 0, &path).is_err());
}
