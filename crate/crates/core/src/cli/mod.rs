//! The `ties` command line.

mod args;
mod commands;

use std::ffi::OsString;
use std::fs;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};

pub use args::{Cli, Command};

use crate::error::{Error, Result};

/// Exit status for usage, configuration and missing-input errors.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 1;

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&args) {
        Ok(cli) => cli,
        Err(Parsed::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
        Err(Parsed::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io { .. } | Error::Parse { .. } | Error::Vocabulary(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::TrainGraph(a) => commands::train_graph_cmd(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Infer(a) => commands::infer_cmd(a),
        Command::Protocol(a) => commands::protocol_cmd(a),
        Command::Synth(a) => commands::synth_cmd(a),
        Command::Project(a) => commands::project_cmd(a),
    }
}

enum Parsed {
    Clap(clap::Error),
    Config(Error),
}

fn parse(args: &[OsString]) -> std::result::Result<Cli, Parsed> {
    // lenient first pass: required flags may still come from the config file
    let loose = Cli::command().ignore_errors(true).try_get_matches_from(args);
    let config = loose.as_ref().ok().and_then(|m| {
        let path = m.get_one::<std::path::PathBuf>("config").cloned()?;
        m.subcommand().is_some().then_some((path, m))
    });
    let mut full = args.to_vec();
    if let Some((path, matches)) = config {
        full.extend(config_args(matches, &path).map_err(Parsed::Config)?);
    }
    let matches = Cli::command().try_get_matches_from(full).map_err(Parsed::Clap)?;
    Cli::from_arg_matches(&matches).map_err(Parsed::Clap)
}

/// Turns `key=value` lines into `--key value` arguments for every key not
/// already given on the command line. Unknown keys are rejected.
fn config_args(matches: &ArgMatches, path: &std::path::Path) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let root = Cli::command();
    let cmd = root.find_subcommand(name).expect("parsed subcommand exists");
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_long() != Some("config"))
            .ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: unknown key {key:?} for `{name}`",
                    path.display(),
                    n + 1
                ))
            })?;
        if sub.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        out.push(OsString::from(format!("--{key}")));
        out.push(OsString::from(value));
    }
    Ok(out)
}
