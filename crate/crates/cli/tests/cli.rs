use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_linekit");

fn run(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn summary(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

/// Runs twice into fresh directories and compares every output file.
fn assert_reproducible(args: &[&str], config: &str) -> Value {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let sa = summary(&run(args, config, a.path()));
    let sb = summary(&run(args, config, b.path()));
    let files: Vec<String> = sa["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| Path::new(p.as_str().unwrap()).file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(!files.is_empty());
    for f in &files {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    for key in ["version", "command", "config", "elapsed_s", "result"] {
        assert!(sa.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(sa["config"], sb["config"]);
    sa
}

const ANALYZE: &str = r#"{
  "medium": {"kind": "constant", "eps_real": 2.6},
  "lengths": {"value": [0, 1, 4, 6], "unit": "cm"},
  "frequency": {"f_min_hz": 0.05e9, "f_max_hz": 25e9, "points": 501}
}"#;

#[test]
fn analyze_is_reproducible_and_documents_defaults() {
    let s = assert_reproducible(&["analyze"], ANALYZE);
    assert_eq!(s["config"]["margin_deg"], 30.0);
    assert_eq!(s["config"]["scaling"], "none");
    assert_eq!(s["config"]["medium"]["eps_imag"], 0.0);
    assert_eq!(s["result"]["n_lines"], 4);
}

#[test]
fn analyze_csv_has_stable_header() {
    let d = TempDir::new().unwrap();
    summary(&run(&["analyze"], ANALYZE, d.path()));
    let csv = fs::read_to_string(d.path().join("out/phase_curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "frequency_hz,lambda,kappa,phi_deg,degenerate_flag");
    assert_eq!(lines.count(), 501);
    let doc: Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/analyze.json")).unwrap()).unwrap();
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert!(doc.get("elapsed_s").is_none());
}

#[test]
fn occurrence_scaling_matches_the_unrepeated_set() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    summary(&run(&["analyze"], ANALYZE, a.path()));
    let repeated = ANALYZE.replace("[0, 1, 4, 6]", "[0, 1, 4, 6, 6, 6]").replace(
        r#""points": 501}"#,
        r#""points": 501}, "scaling": "occurrence""#,
    );
    summary(&run(&["analyze"], &repeated, b.path()));
    let phases = |d: &TempDir| -> Vec<f64> {
        fs::read_to_string(d.path().join("out/phase_curve.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
            .collect()
    };
    for (x, y) in phases(&a).iter().zip(phases(&b)) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn design_optimize_waveguide_kit() {
    let cfg = r#"{
      "medium": {"kind": "waveguide", "width": {"value": 864, "unit": "um"}},
      "band": {"f_min_hz": 220e9, "f_max_hz": 300e9},
      "l_max": {"value": 5, "unit": "mm"},
      "loss": {"kind": "regularized", "length_sigma": {"value": 10, "unit": "um"}}
    }"#;
    let s = assert_reproducible(&["design-optimize"], cfg);
    assert_eq!(s["result"]["n_lines"], 4);
    assert!(s["result"]["phase"]["min_phase_deg"].as_f64().unwrap() >= 30.0);
    assert_eq!(s["config"]["optimizer"]["population_factor"], 15);

    let d = TempDir::new().unwrap();
    let other = summary(&run(&["design-optimize", "--seed", "99"], cfg, d.path()));
    assert_eq!(other["config"]["optimizer"]["seed"], 99);
}

#[test]
fn two_line_design_is_a_quarter_wave_kit() {
    let cfg = r#"{
      "medium": {"kind": "constant", "eps_real": 2.6},
      "band": {"f_min_hz": 1e9, "f_max_hz": 8e9},
      "n_lines": 2
    }"#;
    let s = assert_reproducible(&["design-optimize"], cfg);
    let lengths = s["result"]["result"]["lengths"].as_array().unwrap();
    assert_eq!(lengths.len(), 2);
}

#[test]
fn ruler_linecount_and_trl_band() {
    let ruler = r#"{
      "medium": {"kind": "constant", "eps_real": 2.6},
      "band": {"f_min_hz": 1e9, "f_max_hz": 20e9},
      "n_lines": 4
    }"#;
    let s = assert_reproducible(&["design-ruler"], ruler);
    assert_eq!(s["result"]["ruler"]["marks"], serde_json::json!([0, 1, 4, 6]));

    let count = r#"{
      "medium": {"kind": "constant", "eps_real": 2.6},
      "band": {"f_min_hz": 3e9, "f_max_hz": 8.5215e9},
      "l_max": {"value": 6, "unit": "cm"}
    }"#;
    let s = assert_reproducible(&["linecount"], count);
    assert_eq!(s["result"]["harmonic"]["m_min"], 4);
    assert_eq!(s["result"]["harmonic"]["n_lines"], 4);

    let trl = r#"{
      "medium": {"kind": "constant", "eps_real": 2.6},
      "band": {"f_min_hz": 1e9, "f_max_hz": 8e9},
      "margin_deg": 20
    }"#;
    let s = assert_reproducible(&["trl-band"], trl);
    assert_eq!(s["result"]["band_index"], 0);
    assert!((s["result"]["achieved_margin"].as_f64().unwrap() - 20.0).abs() < 1e-9);
}

#[test]
fn mc_sens_writes_both_tables() {
    let cfg = r#"{
      "medium": {"kind": "constant", "eps_real": 5.2},
      "lengths": {"value": [0, 0.25, 0.7, 1.6, 3.3, 5.05], "unit": "mm"},
      "frequency": {"f_min_hz": 1e9, "f_max_hz": 110e9, "points": 12},
      "mc": {"trials": 20, "eps_sigma": [0.1, 0], "seed": 4}
    }"#;
    let s = assert_reproducible(&["mc-sens", "--threads", "1"], cfg);
    assert_eq!(s["config"]["mc"]["noise_sigma"], 0.1);
    assert_eq!(s["config"]["mc"]["length_sigma"]["unit"], "um");
    let d = TempDir::new().unwrap();
    summary(&run(&["mc-sens"], cfg, d.path()));
    let mae = fs::read_to_string(d.path().join("out/mae.csv")).unwrap();
    assert!(mae.starts_with("frequency_hz,term_name,mae,excluded_trials\n"));
    assert_eq!(mae.lines().count(), 1 + 12 * 4);
    let inv = fs::read_to_string(d.path().join("out/inverse_lambda.csv")).unwrap();
    assert!(inv.starts_with("frequency_hz,lambda,inverse_lambda\n"));
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let d = TempDir::new().unwrap();
    let o = run(&["analyze"], &ANALYZE.replace(r#""unit": "cm""#, r#""unit": "inch""#), d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lengths.unit"));

    let o = run(&["analyze"], &ANALYZE.replace(r#""eps_real": 2.6"#, r#""eps_real": 2.6, "tan_d": 0.1"#), d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tan_d"));

    let o = run(&["analyze"], &ANALYZE.replace(r#""eps_real": 2.6"#, r#""eps_real": -1"#), d.path());
    assert_eq!(o.status.code(), Some(2));

    let o = Command::new(BIN).args(["analyze", "--config", "/nonexistent/x.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(BIN).arg("analyze").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_exits_3() {
    let cfg = r#"{
      "medium": {"kind": "constant", "eps_real": 2.6},
      "band": {"f_min_hz": 1e9, "f_max_hz": 8e9},
      "band_n": 3
    }"#;
    let d = TempDir::new().unwrap();
    let o = run(&["design-ruler"], cfg, d.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn degenerate_kit_exits_4() {
    let d = TempDir::new().unwrap();
    let o = run(&["analyze"], &ANALYZE.replace("[0, 1, 4, 6]", "[2, 2, 2]"), d.path());
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
