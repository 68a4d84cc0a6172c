//! Command-line surface of tonguetrace: configuration, orchestration and
//! serialization. The binary is a thin wrapper over [`run`].

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod verify;

use clap::{Args, Parser, Subcommand};
use config::{Command, Origin, RunConfig, Settings};
use error::CliError;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "tonguetrace", version, about = "Transition curves of Mathieu-type oscillators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Floquet stability chart as a binary PGM.
    Chart(Flags),
    /// Trace transition curves to CSV.
    Trace(Flags),
    /// Solve one point and compare x_N(t) with direct integration.
    SolvePoint(Flags),
    /// Run the acceptance suite.
    Verify(Flags),
}

/// Flags shared by every subcommand. Each overrides the key of the same
/// name in `--config`.
#[derive(Debug, Args, Default)]
pub struct Flags {
    /// key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// classical | damped | impulsive
    #[arg(long)]
    pub variant: Option<String>,
    /// Branch id (p2-zero, p2-left, p2-right, p4-left, p4-right); comma list for trace.
    #[arg(long)]
    pub branch: Option<String>,
    /// δ range lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// ε range lo:hi, or a single ε for solve-point.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<String>,
    /// Chart resolution NXxNY.
    #[arg(long)]
    pub res: Option<String>,
    /// Expansion order N.
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub damping: Option<String>,
    /// Nominal continuation step in ε.
    #[arg(long)]
    pub step: Option<String>,
    /// 2pi | 4pi (solve-point).
    #[arg(long)]
    pub period: Option<String>,
    /// δ window lo:hi for solve-point; located directly when given.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Time samples per period (solve-point).
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// Curve CSV files drawn on the chart (repeatable or comma list).
    #[arg(long)]
    pub overlay: Vec<String>,
    /// Worker threads; capped by TONGUETRACE_WORKERS.
    #[arg(long)]
    pub workers: Option<String>,
    /// Newton tolerance.
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    /// verify: skip the slowest rows.
    #[arg(long)]
    pub fast: bool,
    /// Debug: apply the impulse with the wrong sign in the RK oracle.
    #[arg(long)]
    pub flip_jump_sign: bool,
    /// verify: print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
}

impl Flags {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => Settings::parse_file(path)?,
            None => Settings::default(),
        };
        let pairs = [
            ("variant", &self.variant),
            ("branch", &self.branch),
            ("delta", &self.delta),
            ("eps", &self.eps),
            ("res", &self.res),
            ("order", &self.order),
            ("damping", &self.damping),
            ("step", &self.step),
            ("period", &self.period),
            ("window", &self.window),
            ("samples", &self.samples),
            ("out", &self.out),
            ("workers", &self.workers),
            ("tol", &self.tol),
            ("max_iters", &self.max_iters),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                s.set(key, v.clone(), Origin::Flag);
            }
        }
        if !self.overlay.is_empty() {
            s.set("overlay", self.overlay.join(","), Origin::Flag);
        }
        Ok(s)
    }

    pub fn config(&self, command: Command) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::from_settings(command, &self.settings()?)?;
        cfg.fast = self.fast;
        cfg.flip_jump_sign = self.flip_jump_sign;
        Ok(cfg)
    }
}

pub fn cmd_verify(cfg: &RunConfig, json: bool) -> Result<verify::Report, CliError> {
    let opts = verify::VerifyOptions {
        fast: cfg.fast,
        flip_jump_sign: cfg.flip_jump_sign,
        workers: cfg.workers,
    };
    let report = verify::run(&opts, |row| {
        if !json {
            println!("{}", row.line());
        }
    });
    let text = io::to_json(&report);
    if json {
        println!("{text}");
    }
    if let Some(path) = &cfg.out {
        io::write_file(path, text.as_bytes())?;
    }
    if !json {
        let failed = report.rows.iter().filter(|r| !r.passed).count();
        println!("{} of {} criteria passed", report.rows.len() - failed, report.rows.len());
    }
    Ok(report)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Sub::Chart(f) => commands::cmd_chart(&f.config(Command::Chart)?),
        Sub::Trace(f) => commands::cmd_trace(&f.config(Command::Trace)?),
        Sub::SolvePoint(f) => commands::cmd_solve_point(&f.config(Command::SolvePoint)?),
        Sub::Verify(f) => {
            let report = cmd_verify(&f.config(Command::Verify)?, f.json)?;
            match report.rows.iter().filter(|r| !r.passed).count() {
                0 => Ok(()),
                failed => Err(CliError::VerifyFailed { failed }),
            }
        }
    }
}
