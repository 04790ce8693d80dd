use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ebm_triage_cli::run(std::env::args_os()))
}
