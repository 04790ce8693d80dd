//! `ebm-triage` command-line tool.
//!
//! Exit codes: 0 success, 1 other failure, 2 bad flags or configuration,
//! 3 I/O error, 4 model/data mismatch. Failures print one `error:` line on
//! stderr.

mod args;
mod bench;
mod classify;
mod common;
mod error;
mod eval;
mod serve;
mod train;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
use args::Command;
pub use error::{CliError, EXIT_FAILURE, EXIT_IO, EXIT_MISMATCH, EXIT_USAGE};

/// Parse `argv` and run; returns the process exit code.
pub fn run(argv: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Train(a) => train::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Classify(a) => classify::run(&a),
        Command::Serve(a) => serve::run(&a),
        Command::Bench(a) => bench::run(&a),
    }
}
