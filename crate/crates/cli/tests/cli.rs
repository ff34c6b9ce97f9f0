//! End-to-end runs of the `sivlab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sivlab_cli::CsvDocument;

fn sivlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sivlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SIVLAB_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn unknown_key_exits_2_naming_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.conf", "[rabi_analytic]\nt1_ns = 1.85\nt3_ns = 2\n");
    let out = sivlab(&["rabi_analytic", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t3_ns"));
    assert!(!tmp.path().join("o").exists(), "nothing computed or written");
}

#[test]
fn precondition_violation_exits_2_before_computing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.conf", "t1_ns = 1.0\nt2_ns = 2.5\n");
    let out = sivlab(&["g2", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t2"));
}

#[test]
fn numeric_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.conf", "rabi_ghz = 2\ndetuning_min_ghz = -0.1\ndetuning_max_ghz = 0.1\n");
    let out = sivlab(&["lineshape", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn rabi_analytic_starts_in_ground_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.conf", "[rabi_analytic]\nt1_ns = 1.85\nt2_ns = 1.62\nrabi_ghz = 0.906\n");
    let out = sivlab(&["run", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = CsvDocument::parse(&fs::read_to_string(tmp.path().join("o/rabi_analytic.csv")).unwrap()).unwrap();
    assert_eq!(doc.columns, ["tau_ns", "population"]);
    assert_eq!(doc.rows[0], vec![0.0, 0.0]);
    assert_eq!(doc.meta_value("mu_mode"), Some("obe"));
    assert!(doc.meta_value("config_hash").is_some_and(|h| h.len() == 64));
}

#[test]
fn identical_runs_are_byte_identical_and_hash_tracks_physics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.conf", "[synth]\nmodel = rabi\nseed = 11\nfit = true\n");
    for out in ["a", "b"] {
        assert_eq!(sivlab(&["synth", "--config", &cfg, "--out", out], tmp.path()).status.code(), Some(0));
    }
    for file in ["synth.csv", "synth_fit.csv"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    sivlab(&["synth", "--config", &cfg, "--out", "c", "--seed", "12"], tmp.path());
    let hash = |dir: &str| {
        let text = fs::read_to_string(tmp.path().join(dir).join("synth.csv")).unwrap();
        CsvDocument::parse(&text).unwrap().meta_value("config_hash").unwrap().to_string()
    };
    assert_ne!(hash("a"), hash("c"));
}

#[test]
fn autler_map_defaults_to_61_by_61_long_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sivlab(&["autler_map", "--out", "o", "--plot"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let doc = CsvDocument::parse(&fs::read_to_string(tmp.path().join("o/autler_map.csv")).unwrap()).unwrap();
    assert_eq!(doc.columns, ["delta_c_ghz", "delta_d_ghz", "fluorescence"]);
    assert_eq!(doc.rows.len(), 61 * 61);
    assert!(tmp.path().join("o/autler_map.svg").exists());
}

#[test]
fn validate_reports_every_section() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.conf", "[g2]\nrabi_ghz = 1\n[ramsey]\nt2_ns = 0.78\n");
    let out = sivlab(&["validate", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("g2: ok") && text.contains("ramsey: ok"));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sivlab"))
        .args(["rabi_analytic"])
        .current_dir(tmp.path())
        .env("SIVLAB_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("from_env/rabi_analytic.csv").exists());
}

#[test]
fn fit_subcommand_round_trips_its_own_output() {
    let tmp = tempfile::tempdir().unwrap();
    sivlab(&["rabi_analytic", "--out", "o"], tmp.path());
    let cfg = write_config(tmp.path(), "f.conf", "input = o/rabi_analytic.csv\nmodel = rabi\nweighting = unit\n");
    let out = sivlab(&["fit", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("o/fit_fit.csv")).unwrap();
    let line = report.lines().find(|l| l.starts_with("omega_ghz,")).unwrap();
    let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 0.906).abs() < 1e-6);
}

#[test]
fn reproduce_all_passes_and_reports_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sivlab(&["reproduce-all", "--out", "all"], tmp.path());
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{table}");
    assert!(table.contains("mu_mode = obe"));
    let row = table.lines().find(|l| l.contains("fwhm_mhz")).unwrap();
    assert!(row.ends_with("PASS"));
    assert!(!table.contains("FAIL"));
}

#[test]
fn reproduce_all_without_output_dir_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("all");
    fs::create_dir(&root).unwrap();
    let summary = sivlab_cli::reproduce::reproduce_all(&root.join("removed"));
    assert_ne!(summary.exit_code, 0);
    assert!(summary.rows.iter().skip(1).all(|r| r[4] == "FAIL"));
}
