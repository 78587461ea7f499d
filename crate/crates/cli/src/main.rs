//! `hmge` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod options;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use options::{Cli, CliError, CliResult, Command, FileConfig};

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(threads) = cli.threads.or(file.threads) {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        if !hmge::par::init_threads(threads) {
            log::warn!("thread pool already initialized; --threads {threads} ignored");
        }
    }
    match &cli.command {
        Command::Synth(a) => commands::synth(a, &file),
        Command::Train(a) => commands::train_cmd(a, &file),
        Command::Eval(a) => commands::eval(a, &file),
        Command::Ablate(a) => commands::ablate(a, &file),
        Command::Sweep(a) => commands::sweep(a, &file),
        Command::Export(a) => commands::export_cmd(a, &file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
