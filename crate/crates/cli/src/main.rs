//! `sim`: run triplet-qubit experiments from a JSON config.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on runtime
//! errors. Errors are reported on stderr as a single JSON object.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::{json, Value};
use tripletsim::cli_io::{
    apply_override, config_from_value, emit, parse_value, run_experiment, ExperimentKind,
};
use tripletsim::Error;

const LOG_ENV: &str = "SIM_LOG";

fn common_args() -> [Arg; 5] {
    [
        Arg::new("config")
            .long("config")
            .short('c')
            .value_name("PATH")
            .help("JSON config file"),
        Arg::new("set")
            .long("set")
            .value_name("KEY=VALUE")
            .action(ArgAction::Append)
            .help("override a config key by dotted path, e.g. rabi.points=101"),
        Arg::new("out")
            .long("out")
            .short('o')
            .value_name("PATH")
            .help("output file (default: stdout)"),
        Arg::new("format")
            .long("format")
            .value_parser(["csv", "json"])
            .help("output format (default: csv)"),
        Arg::new("seed")
            .long("seed")
            .value_name("U64")
            .value_parser(clap::value_parser!(u64))
            .help("random seed"),
    ]
}

fn cli() -> Command {
    let mut cmd = Command::new("sim")
        .version(tripletsim::cli_io::VERSION)
        .about("Simulate and fit optically addressable molecular triplet qubits")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help(format!(
            "Log verbosity is read from {LOG_ENV} (error, warn, info, debug, trace)."
        ));
    for k in ExperimentKind::ALL {
        cmd = cmd.subcommand(
            Command::new(k.name())
                .about(k.description())
                .args(common_args()),
        );
    }
    cmd
}

struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            code: if error.is_config() { 1 } else { 2 },
            error,
        }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        error: Error::Config(msg.into()),
    }
}

fn build_config_value(kind: ExperimentKind, m: &ArgMatches) -> Result<Value, Failure> {
    let mut value = match m.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read config '{path}': {e}")))?;
            parse_value(&text)?
        }
        None => json!({}),
    };
    if let Some(file_kind) = value.get("kind").and_then(Value::as_str) {
        if file_kind != kind.name() {
            log::warn!("config kind '{file_kind}' replaced by subcommand '{kind}'");
        }
    }
    apply_override(&mut value, "kind", &json!(kind.name()).to_string())?;
    for s in m.get_many::<String>("set").into_iter().flatten() {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| config_error(format!("--set expects KEY=VALUE, got '{s}'")))?;
        apply_override(&mut value, key.trim(), raw)?;
    }
    if let Some(seed) = m.get_one::<u64>("seed") {
        apply_override(&mut value, "seed", &seed.to_string())?;
    }
    if let Some(f) = m.get_one::<String>("format") {
        apply_override(&mut value, "output.format", &json!(f).to_string())?;
    }
    if let Some(out) = m.get_one::<String>("out") {
        apply_override(&mut value, "output.path", &json!(out).to_string())?;
    }
    Ok(value)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn run(kind: ExperimentKind, m: &ArgMatches) -> Result<(), Failure> {
    let config = config_from_value(build_config_value(kind, m)?)?;
    let record = run_experiment(&config)?;
    let bytes = emit(&record, config.output.format)?;
    match &config.output.path {
        Some(path) => write_atomic(path, &bytes).map_err(|e| Failure {
            code: 2,
            error: Error::InvalidParameter(format!("cannot write '{}': {e}", path.display())),
        })?,
        None => std::io::stdout().write_all(&bytes).map_err(|e| Failure {
            code: 2,
            error: Error::InvalidParameter(format!("cannot write to stdout: {e}")),
        })?,
    }
    Ok(())
}

fn report(f: &Failure) {
    let msg =
        json!({ "error": f.error.kind(), "message": f.error.to_string(), "exit_code": f.code });
    eprintln!("{msg}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind::*;
            if matches!(
                e.kind(),
                DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report(&config_error(e.to_string().trim().to_string()));
            return ExitCode::from(1);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let kind = ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .expect("subcommands mirror kinds");
    match run(kind, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f);
            ExitCode::from(f.code)
        }
    }
}
