use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use sivlab_cli::reproduce::reproduce_all;
use sivlab_cli::{
    config_experiment, execute, plan, read_config, CliError, ConfigError, ConfigFile, Section, DEFAULT_OUT,
    EXIT_CONFIG, EXIT_OK, EXPERIMENTS,
};

fn cli() -> Command {
    let global = [
        Arg::new("config").long("config").value_name("PATH").value_parser(value_parser!(PathBuf)).global(true).help("Config file (key = value, optional [experiment] sections)"),
        Arg::new("out").long("out").value_name("DIR").env("SIVLAB_OUT").value_parser(value_parser!(PathBuf)).global(true).help("Output directory"),
        Arg::new("seed").long("seed").value_name("N").value_parser(value_parser!(u64)).global(true).help("Noise seed, overrides the config"),
        Arg::new("plot").long("plot").action(ArgAction::SetTrue).global(true).help("Also write an SVG plot"),
        Arg::new("threads").long("threads").value_name("N").value_parser(value_parser!(usize)).global(true).help("Worker threads for sweeps"),
    ];
    let mut cmd = Command::new("sivlab")
        .version(sivlab_cli::VERSION)
        .about("Driven two-level and Lambda emitter simulations from config files")
        .subcommand_required(true)
        .args(global);
    for name in EXPERIMENTS {
        let mut sub = Command::new(name).about(format!("Run the {name} experiment"));
        if name.contains('_') {
            sub = sub.alias(name.replace('_', "-"));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd.subcommand(Command::new("run").about("Run the experiment named in --config"))
        .subcommand(Command::new("validate").about("Check a config without computing"))
        .subcommand(Command::new("reproduce-all").about("Run every bundled config and print a summary table"))
}

fn load(m: &ArgMatches) -> Result<ConfigFile, CliError> {
    match m.get_one::<PathBuf>("config") {
        Some(path) => read_config(path),
        None => Ok(ConfigFile::default()),
    }
}

fn section_for(file: &ConfigFile, experiment: &str, m: &ArgMatches) -> Section {
    let mut s = file.section(experiment);
    if let Some(seed) = m.get_one::<u64>("seed") {
        s.set_override("seed", seed);
    }
    s
}

fn out_dir(m: &ArgMatches, configured: Option<PathBuf>) -> PathBuf {
    m.get_one::<PathBuf>("out")
        .cloned()
        .or(configured)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn run_one(experiment: &str, m: &ArgMatches) -> Result<(), CliError> {
    let file = load(m)?;
    let mut section = section_for(&file, experiment, m);
    let mut plan = plan(experiment, &mut section)?;
    plan.plot |= m.get_flag("plot");
    let dir = out_dir(m, plan.output.clone());
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let (output, written) = execute(plan, &dir)?;
    println!("{} -> {}", output.summary, list(&written));
    Ok(())
}

fn list(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}

fn validate(m: &ArgMatches) -> Result<(), CliError> {
    let file = load(m)?;
    let names: Vec<String> = match file.shared_value("experiment") {
        Some(name) => vec![name.to_string()],
        None if file.section_names().is_empty() => {
            return Err(ConfigError::new("experiment", "config names no experiment").into());
        }
        None => file.section_names().iter().map(|s| s.to_string()).collect(),
    };
    let mut first_error = None;
    for name in names {
        let mut section = section_for(&file, &name, m);
        match plan(&name, &mut section) {
            Ok(p) => println!("{name}: ok (config_hash={})", p.hash),
            Err(e) => {
                eprintln!("{name}: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn reproduce(m: &ArgMatches) -> Result<i32, CliError> {
    let root = out_dir(m, None);
    fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
    let summary = reproduce_all(&root);
    print!("{}", summary.table());
    let path = Path::new(&root).join("summary.csv");
    fs::write(&path, summary.csv()).map_err(|e| CliError::io(&path, e))?;
    Ok(summary.exit_code)
}

fn main() -> ExitCode {
    let m = cli().get_matches();
    if let Some(&n) = m.get_one::<usize>("threads") {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let (name, sub) = m.subcommand().expect("subcommand required");
    let result = match name {
        "validate" => validate(sub).map(|_| EXIT_OK),
        "reproduce-all" => reproduce(sub),
        "run" => load(sub)
            .and_then(|f| Ok(config_experiment(&f)?))
            .and_then(|exp| run_one(&exp, sub).map(|_| EXIT_OK)),
        experiment => run_one(experiment, sub).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
