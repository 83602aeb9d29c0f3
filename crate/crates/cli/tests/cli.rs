//! CLI behavior: formats, round-trips, error paths, figure bundles.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use im3_kit::{aci_profile, AciProfile, ChannelPlan, NonlinearityModel};

fn im3kit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_im3kit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = im3kit(args);
    assert!(
        out.status.success(),
        "im3kit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn closed_form_table_small_n() {
    let csv = stdout_of(&["closed-form", "--channels", "3", "--format", "csv"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# im3-kit v1"));
    assert_eq!(lines.next(), Some("n,L_D,L_T,P"));
    assert_eq!(lines.next(), Some("1,1,0,0.28125"));
    assert_eq!(lines.next(), Some("2,0,2,1.125"));
    assert_eq!(lines.next(), Some("3,1,0,0.28125"));
}

#[test]
fn analyze_json_round_trips_profile_exactly() {
    let json = stdout_of(&["analyze", "--channels", "9", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    let parsed: AciProfile = serde_json::from_value(doc["profile"].clone()).unwrap();

    let plan = ChannelPlan::equal(9, 16.0, 1.0, 1.0).unwrap();
    let model = NonlinearityModel::new(0.0, 1.0).unwrap();
    let expected = aci_profile(&plan, &model);
    assert_eq!(parsed, expected, "JSON round trip must be exact");

    let signal: Vec<f64> = serde_json::from_value(doc["signal_amplitudes"].clone()).unwrap();
    assert_eq!(signal.len(), 9);
}

#[test]
fn analyze_reads_sparse_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    std::fs::File::create(&path)
        .unwrap()
        .write_all(br#"{"frequencies": [5, 7, 10, 14], "amplitudes": [1, 1, 1, 1]}"#)
        .unwrap();
    let csv = stdout_of(&[
        "analyze",
        "--plan",
        path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 10, "gridded plan has 10 channels");
    let pseudo_rows = rows.iter().filter(|r| r.ends_with("true")).count();
    assert_eq!(pseudo_rows, 6);
}

#[test]
fn bad_plan_file_names_the_field_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::File::create(&path)
        .unwrap()
        .write_all(br#"{"f0": 10.0, "amplitudes": [1, 2]}"#)
        .unwrap();
    let out = im3kit(&["analyze", "--plan", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(
        msg.contains("delta_f"),
        "error should name the field: {msg}"
    );

    let missing = im3kit(&["analyze", "--plan", "/nonexistent/plan.json"]);
    assert!(!missing.status.success());
}

#[test]
fn incommensurate_plan_error_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::File::create(&path)
        .unwrap()
        .write_all(br#"{"frequencies": [1.0, 2.4142135623730951, 4.0], "amplitudes": [1, 1, 1]}"#)
        .unwrap();
    let out = im3kit(&["gridify", "--plan", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("incommensurate"), "got: {msg}");
}

#[test]
fn db_reference_shifts_output() {
    // power == db_ref must print 0 dB.
    let csv = stdout_of(&[
        "qpsk",
        "--channels",
        "3",
        "--symbols",
        "256",
        "--format",
        "csv",
        "--db-ref",
        "1.125",
    ]);
    assert!(csv.starts_with("# im3-kit v1\nchannel,power_db,power_db_normalized\n"));
    // Center channel of N=3 normalizes to the analytic 1.125, i.e. 0 dB
    // against this reference.
    let center_row: Vec<&str> = csv.lines().nth(3).unwrap().split(',').collect();
    let normalized_db: f64 = center_row[2].parse().unwrap();
    assert!(normalized_db.abs() < 1e-9, "center must sit at 0 dB");
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# im3-kit v1"), "{path:?} version line");
    lines
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn figures_bundle_matches_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("figs");
    stdout_of(&[
        "figures",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--sweep",
        "3..99",
        "--skip-qpsk",
    ]);

    // Sweep: ratio starts at 4.0 and lands near 1.508 by N = 99.
    let sweep = read_csv(&out_dir.join("sweep_stats.csv"));
    assert_eq!(sweep.len(), 97);
    assert_eq!(sweep[0][0], "3");
    let first_ratio: f64 = sweep[0][2].parse().unwrap();
    assert_eq!(first_ratio, 4.0);
    let last_ratio: f64 = sweep.last().unwrap()[2].parse().unwrap();
    assert!((last_ratio - 1.508).abs() < 0.002, "got {last_ratio}");
    let max_norm: f64 = sweep.last().unwrap()[1].parse().unwrap();
    assert!((0.40..=0.43).contains(&max_norm));

    // Profiles exist for the four benchmark sizes with matching lengths.
    for (n, file) in [
        (9usize, "profile_n9.csv"),
        (10, "profile_n10.csv"),
        (31, "profile_n31.csv"),
        (99, "profile_n99.csv"),
    ] {
        let rows = read_csv(&out_dir.join(file));
        assert_eq!(rows.len(), n, "{file}");
    }
    // N=9 normalized profile peaks at the center with the known value.
    let p9 = read_csv(&out_dir.join("profile_n9.csv"));
    let center: f64 = p9[4][2].parse().unwrap();
    assert!((center - 23.625 / 81.0).abs() < 1e-12);

    // Waveform and spectrum series are aligned: one spacing period at 512
    // samples for the 3-tone plan, one-sided spectrum of 257 bins.
    let wave = read_csv(&out_dir.join("waveform_intermod.csv"));
    let spec = read_csv(&out_dir.join("spectrum_intermod.csv"));
    assert_eq!(wave.len(), 512);
    assert_eq!(spec.len(), 257);
}

#[test]
fn sweep_range_is_validated() {
    let out = im3kit(&[
        "figures",
        "--sweep",
        "2..9",
        "--out-dir",
        "/tmp/ignored-sweep",
    ]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("sweep"), "got: {msg}");
}

#[test]
fn missing_plan_and_channels_is_an_error() {
    let out = im3kit(&["analyze"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--plan or --channels"));
}
