//! Config-driven runner for the sivlab experiments.

pub mod config;
pub mod csvdoc;
pub mod experiments;
pub mod reproduce;
pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sivlab::fitkit::FitResult;

pub use config::{ConfigError, ConfigFile, Section};
pub use csvdoc::CsvDocument;
pub use experiments::{plan, Artifact, Output, Plan, EXPERIMENTS};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_OUT: &str = "sivlab_out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CHECKS: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("numeric failure: {0}")]
    Numeric(#[from] sivlab::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Checks(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Numeric(_) => EXIT_NUMERIC,
            Self::Io { .. } => EXIT_IO,
            Self::Checks(_) => EXIT_CHECKS,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(ConfigFile::parse(&text)?)
}

/// Experiment named by a config: its `experiment` key, else its only section.
pub fn config_experiment(file: &ConfigFile) -> Result<String, ConfigError> {
    if let Some(name) = file.shared_value("experiment") {
        return Ok(name.to_string());
    }
    match file.section_names().as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(ConfigError::new("experiment", "config names no experiment")),
        many => Err(ConfigError::new(
            "experiment",
            format!("config has several sections ({}); choose one with a subcommand", many.join(", ")),
        )),
    }
}

fn common_meta(plan: &Plan) -> Vec<(String, String)> {
    let mut meta = vec![
        ("sivlab_version".to_string(), VERSION.to_string()),
        ("experiment".to_string(), plan.experiment.clone()),
        ("config_hash".to_string(), plan.hash.clone()),
        ("mu_mode".to_string(), plan.mu_mode.to_string()),
    ];
    if let Some(seed) = plan.seed {
        meta.push(("seed".to_string(), seed.to_string()));
    }
    meta
}

/// Parameter table with fit diagnostics as metadata.
pub fn render_report(meta: &[(String, String)], fit: &FitResult) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "# converged={}", fit.converged);
    let _ = writeln!(out, "# chi2_reduced={}", csvdoc::format_value(fit.chi2_reduced));
    let _ = writeln!(out, "# r_squared={}", csvdoc::format_value(fit.r_squared));
    let _ = writeln!(out, "# n_iter={}", fit.n_iter);
    let _ = writeln!(out, "# message={}", fit.message.replace('\n', " "));
    out.push_str("parameter,value,stderr\n");
    for ((n, v), e) in fit.names.iter().zip(&fit.values).zip(&fit.stderr) {
        let _ = writeln!(out, "{n},{},{}", csvdoc::format_value(*v), csvdoc::format_value(*e));
    }
    out
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Runs the plan and writes its files into `dir`, which must exist.
pub fn execute(plan: Plan, dir: &Path) -> Result<(Output, Vec<PathBuf>), CliError> {
    let meta = common_meta(&plan);
    let name = plan.experiment.clone();
    let want_plot = plan.plot;
    let output = (plan.job)()?;
    let mut written = Vec::new();
    for artifact in &output.artifacts {
        match artifact {
            Artifact::Table { suffix, doc } => {
                let mut doc = doc.clone();
                let own = std::mem::take(&mut doc.meta);
                doc.meta = meta.clone();
                for (k, v) in own {
                    doc.push_meta(&k, v);
                }
                write(dir.join(format!("{name}{suffix}.csv")), &doc.render(), &mut written)?;
            }
            Artifact::Report(fit) => {
                write(dir.join(format!("{name}_fit.csv")), &render_report(&meta, fit), &mut written)?;
            }
        }
    }
    if want_plot {
        if let Some(plot) = &output.plot {
            write(dir.join(format!("{name}.svg")), &svg::render(plot), &mut written)?;
        }
    }
    Ok((output, written))
}
