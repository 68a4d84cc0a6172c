//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

use std::process::ExitCode;
use tonguetrace_cli::config::default_workers;
use tonguetrace_cli::verify::{run, VerifyOptions};

fn main() -> ExitCode {
    let opts = VerifyOptions {
        fast: false,
        flip_jump_sign: false,
        workers: default_workers(),
    };
    println!("\nrunning {} acceptance criteria", tonguetrace_cli::verify::CRITERIA.len());
    let report = run(&opts, |row| println!("{}", row.line()));
    let failed = report.rows.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed\n", report.rows.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
