//! Runs every bundled config and compares extracted quantities to targets.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sivlab::tls;

use crate::{config_experiment, execute, plan, CliError, ConfigFile, EXIT_CHECKS, EXIT_OK};

pub const BUNDLED: [(&str, &str); 13] = [
    ("lineshape_transform_limit", include_str!("../configs/lineshape_transform_limit.conf")),
    ("lifetime", include_str!("../configs/lifetime.conf")),
    ("rabi_analytic", include_str!("../configs/rabi_analytic.conf")),
    ("rabi_trace", include_str!("../configs/rabi_trace.conf")),
    ("detuning_map", include_str!("../configs/detuning_map.conf")),
    ("g2", include_str!("../configs/g2.conf")),
    ("g2_irf", include_str!("../configs/g2_irf.conf")),
    ("mollow_spectrum", include_str!("../configs/mollow_spectrum.conf")),
    ("autler_scan", include_str!("../configs/autler_scan.conf")),
    ("autler_map", include_str!("../configs/autler_map.conf")),
    ("pulsed_rabi", include_str!("../configs/pulsed_rabi.conf")),
    ("ramsey", include_str!("../configs/ramsey.conf")),
    ("synth_rabi", include_str!("../configs/synth_rabi.conf")),
];

struct Target {
    run: &'static str,
    metric: &'static str,
    wanted: &'static str,
    pass: fn(f64) -> bool,
}

fn within(v: f64, centre: f64, rel: f64) -> bool {
    (v - centre).abs() <= rel * centre.abs()
}

const TARGETS: [Target; 20] = [
    Target { run: "lineshape_transform_limit", metric: "fwhm_mhz", wanted: "86 MHz +/- 3%", pass: |v| within(v, 86.0, 0.03) },
    Target { run: "lifetime", metric: "fit_tau_ns", wanted: "1.85 ns +/- 2%", pass: |v| within(v, 1.85, 0.02) },
    Target { run: "rabi_analytic", metric: "population_start", wanted: "P(0) = 0", pass: |v| v.abs() < 1e-12 },
    Target { run: "rabi_trace", metric: "fit_omega_ghz", wanted: "1.304 GHz +/- 2%", pass: |v| within(v, 1.304, 0.02) },
    Target { run: "rabi_trace", metric: "fit_t2_ns", wanted: "1.62 ns +/- 10%", pass: |v| within(v, 1.62, 0.10) },
    Target { run: "detuning_map", metric: "max_bin_error", wanted: "<= 1 FFT bin", pass: |v| v <= 1.0 },
    Target { run: "g2", metric: "g2_zero", wanted: "< 1e-6", pass: |v| v.abs() < 1e-6 },
    Target { run: "g2", metric: "g2_edge", wanted: "1 +/- 1e-3", pass: |v| (v - 1.0).abs() < 1e-3 },
    Target { run: "g2_irf", metric: "g2_zero", wanted: "> 0 (jitter fills the dip)", pass: |v| v > 1e-3 },
    Target { run: "mollow_spectrum", metric: "peak_low_ghz", wanted: "-2 GHz +/- 2%", pass: |v| within(v, -2.0, 0.02) },
    Target { run: "mollow_spectrum", metric: "peak_high_ghz", wanted: "+2 GHz +/- 2%", pass: |v| within(v, 2.0, 0.02) },
    Target { run: "mollow_spectrum", metric: "height_ratio", wanted: "3 +/- 10%", pass: |v| within(v, 3.0, 0.10) },
    Target { run: "autler_scan", metric: "max_rel_error", wanted: "splitting = Omega_C within 5%", pass: |v| v < 0.05 },
    Target { run: "autler_scan", metric: "r_squared", wanted: "> 0.99 vs sqrt(P)", pass: |v| v > 0.99 },
    Target { run: "autler_map", metric: "valley_max_steps", wanted: "<= 1 grid step off diagonal", pass: |v| v <= 1.0 },
    Target { run: "pulsed_rabi", metric: "oscillations", wanted: ">= 2 periods", pass: |v| v >= 2.0 },
    Target { run: "pulsed_rabi", metric: "first_max", wanted: ">= 0.93", pass: |v| v >= 0.93 },
    Target { run: "ramsey", metric: "fit_t2_ns", wanted: "0.78 ns +/- 5%", pass: |v| within(v, 0.78, 0.05) },
    Target { run: "ramsey", metric: "visibility_zero", wanted: "> 0.95", pass: |v| v > 0.95 },
    Target { run: "synth_rabi", metric: "fit_omega_ghz", wanted: "1.304 GHz +/- 2%", pass: |v| within(v, 1.304, 0.02) },
];

/// Summary row: run, quantity, value, target, status.
pub type Row = [String; 5];

pub struct Summary {
    pub rows: Vec<Row>,
    pub exit_code: i32,
}

impl Summary {
    pub fn table(&self) -> String {
        let header = ["run", "quantity", "value", "target", "status"].map(String::from);
        let all: Vec<&Row> = std::iter::once(&header).chain(&self.rows).collect();
        let widths: Vec<usize> = (0..5).map(|c| all.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in all {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["run", "quantity", "value", "target", "status"]);
        for row in &self.rows {
            let _ = w.write_record(row);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

fn row(run: &str, quantity: &str, value: String, target: &str, status: &str) -> Row {
    [run.to_string(), quantity.to_string(), value, target.to_string(), status.to_string()]
}

/// Runs all bundled configs into subdirectories of `root` (which must exist).
pub fn reproduce_all(root: &Path) -> Summary {
    let oracle = tls::mu_mode_oracle();
    let mut rows = vec![row(
        "mu_oracle",
        &format!("mu_mode = {}", oracle.mode),
        format!("{:.3e}", oracle.discrimination()),
        "RMS discrimination >= 1e3",
        if oracle.discrimination() >= 1e3 { "PASS" } else { "FAIL" },
    )];
    let mut exit_code = EXIT_OK;
    for (name, text) in BUNDLED {
        let result = (|| -> Result<_, CliError> {
            let file = ConfigFile::parse(text)?;
            let experiment = config_experiment(&file)?;
            let mut section = file.section(&experiment);
            let plan = plan(&experiment, &mut section)?;
            let dir = root.join(name);
            fs::create_dir(&dir).or_else(|e| if dir.is_dir() { Ok(()) } else { Err(CliError::io(&dir, e)) })?;
            Ok(execute(plan, &dir)?.0)
        })();
        match result {
            Ok(output) => {
                eprintln!("{name}: {}", output.summary);
                for t in TARGETS.iter().filter(|t| t.run == name) {
                    let (value, ok) = match output.metrics.get(t.metric) {
                        Some(&v) => (format!("{v:.6}"), (t.pass)(v)),
                        None => ("missing".to_string(), false),
                    };
                    if !ok && exit_code == EXIT_OK {
                        exit_code = EXIT_CHECKS;
                    }
                    rows.push(row(name, t.metric, value, t.wanted, if ok { "PASS" } else { "FAIL" }));
                }
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                if exit_code == EXIT_OK || exit_code == EXIT_CHECKS {
                    exit_code = e.exit_code();
                }
                rows.push(row(name, "run", e.to_string(), "completes", "FAIL"));
            }
        }
    }
    if rows[0][4] == "FAIL" && exit_code == EXIT_OK {
        exit_code = EXIT_CHECKS;
    }
    Summary { rows, exit_code }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_validate() {
        for (name, text) in BUNDLED {
            let file = ConfigFile::parse(text).unwrap();
            let experiment = config_experiment(&file).unwrap();
            let mut section = file.section(&experiment);
            assert!(plan(&experiment, &mut section).is_ok(), "{name}");
        }
    }

    #[test]
    fn every_target_names_a_bundled_run() {
        for t in &TARGETS {
            assert!(BUNDLED.iter().any(|(n, _)| *n == t.run), "{}", t.run);
        }
    }
}
