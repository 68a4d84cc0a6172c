use clap::Parser;
use std::process::ExitCode;
use tonguetrace_cli::error::CliError;

fn main() -> ExitCode {
    match tonguetrace_cli::run(tonguetrace_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
