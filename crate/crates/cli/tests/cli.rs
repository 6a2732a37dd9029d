//! End-to-end tests of the command-line surface: fixture runs, exit codes,
//! artifact schemas and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nvpair"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn deer_fixture_recovers_the_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["simulate", &fixture("deer_sq.cfg"), "--out"])
        .arg(&out)
        .arg("--plot")
        .status()
        .unwrap();
    assert!(status.success());

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let extracted = summary["extracted"].as_array().unwrap();
    let freq = extracted
        .iter()
        .find(|e| e["name"] == "oscillation_freq_mhz")
        .expect("fitted frequency present");
    let value = freq["value"].as_f64().unwrap();
    assert!((value - 0.125).abs() <= 0.01, "fitted frequency {value}");
    assert_eq!(summary["seed"], 1);
    assert!(summary["version"].is_string());
    assert!(summary["timestamp_unix"].is_u64());
    assert!(summary["config"]["system"]["nu_dip_mhz"].as_f64().unwrap() == 0.25);

    // signal.csv: header plus one row per grid point.
    let csv = fs::read_to_string(out.join("signal.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "tau_us,signal");
    assert_eq!(csv.lines().count(), 401);
    assert!(out.join("plot.svg").exists());
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = bin()
        .args(["simulate", &fixture("bad_tau.cfg"), "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("tau_stop_us"), "{stderr}");

    // Machine-readable error record.
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(record["error_kind"], "config");
    assert_eq!(record["exit_code"], 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(
        &cfg,
        r#"{
            "experiment": { "kind": "deer", "basis": "sq", "tau_stop_us": 40.0, "n_points": 400 },
            "system": { "d_mhz": 2870.0, "zeeman_a_mhz": 100.0, "zeeman_b_mhz": 40.0, "nu_dip_mhz": 0.25 },
            "mystery": 1
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["simulate"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("mystery"));
}

#[test]
fn repeated_runs_are_byte_identical_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = bin()
            .args(["simulate", &fixture("deer_sq.cfg"), "--seed", "7", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        fs::read(a.join("signal.csv")).unwrap(),
        fs::read(b.join("signal.csv")).unwrap()
    );
    let mut ja: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let mut jb: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.join("summary.json")).unwrap()).unwrap();
    ja["timestamp_unix"] = 0.into();
    jb["timestamp_unix"] = 0.into();
    assert_eq!(
        serde_json::to_string(&ja).unwrap(),
        serde_json::to_string(&jb).unwrap()
    );
}

#[test]
fn hh_sweep_fixture_finds_the_matching_condition() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["simulate", &fixture("hh_dhh.cfg"), "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let center = summary["extracted"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["name"] == "dip_center_mhz")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((center - 10.44).abs() <= 0.05, "dip center {center}");
}

#[test]
fn ramsey_run_emits_spectrum_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ramsey.cfg");
    fs::write(
        &cfg,
        r#"{
            "experiment": { "kind": "ramsey", "basis": "sq", "prep_b": "+1",
                            "reference_offset_mhz": 1.5, "tau_stop_us": 60.0, "n_points": 600 },
            "system": { "d_mhz": 2870.0, "zeeman_a_mhz": 100.0, "zeeman_b_mhz": 40.0, "nu_dip_mhz": 0.26 }
        }"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let status = bin().args(["simulate"]).arg(&cfg).args(["--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let spec = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(spec.lines().next().unwrap().starts_with("freq_mhz,power_signal"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let shift = summary["extracted"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["name"] == "shift_mhz")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((shift - 0.26).abs() <= 0.01, "shift {shift}");
}

#[test]
fn parse_seq_validates_sequences() {
    let ok = bin().args(["parse-seq", &fixture("deer_sq.seq")]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("deer_sq"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.seq");
    fs::write(&bad, "wait -3\nread A P0\n").unwrap();
    let output = bin().args(["parse-seq"]).arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("line 1"));
}

#[test]
fn sequence_experiment_runs_a_seq_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("seq.cfg");
    fs::write(
        &cfg,
        format!(
            r#"{{
                "experiment": {{ "kind": "sequence", "file": {:?} }},
                "system": {{ "d_mhz": 2870.0, "zeeman_a_mhz": 100.0, "zeeman_b_mhz": 40.0, "nu_dip_mhz": 0.25 }}
            }}"#,
            fixture("deer_sq.seq")
        ),
    )
    .unwrap();
    let out = dir.path().join("o");
    let status = bin().args(["simulate"]).arg(&cfg).args(["--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let prob = summary["extracted"][0]["value"].as_f64().unwrap();
    // DEER echo at ν_dip = 0.25, τ = 2 µs: (1 + cos(π·0.25·2))/2.
    let expect = 0.5 * (1.0 + (std::f64::consts::PI * 0.25 * 2.0).cos());
    assert!((prob - expect).abs() < 1e-6, "prob {prob} expect {expect}");
}

#[test]
fn missing_sequence_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("seq.cfg");
    fs::write(
        &cfg,
        r#"{
            "experiment": { "kind": "sequence", "file": "does/not/exist.seq" },
            "system": { "d_mhz": 2870.0, "zeeman_a_mhz": 100.0, "zeeman_b_mhz": 40.0, "nu_dip_mhz": 0.25 }
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["simulate"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
