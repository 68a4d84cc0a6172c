//! Run configuration: a plain `key = value` file overlaid by command-line
//! flags. Both sources go through the same typed parsing so diagnostics name
//! the offending line or flag.

use crate::error::CliError;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use tonguetrace::{Branch, Variant};

/// Environment variable that caps worker threads.
pub const WORKERS_ENV: &str = "TONGUETRACE_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Chart,
    Trace,
    SolvePoint,
    Verify,
}

/// Where a setting came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{}", path.display(), line),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

/// Recognised keys. Flags use the same names with `_` written as `-`.
pub const KEYS: &[&str] = &[
    "variant",
    "branch",
    "delta",
    "eps",
    "res",
    "order",
    "damping",
    "step",
    "period",
    "window",
    "samples",
    "out",
    "overlay",
    "workers",
    "tol",
    "max_iters",
];

/// Raw `key → (value, origin)` settings before typing.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    entries: BTreeMap<String, (String, Origin)>,
}

impl Settings {
    pub fn parse_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, path)
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse_str(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut settings = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let origin = Origin::File {
                path: path.to_path_buf(),
                line: i + 1,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(origin, "", format!("expected key = value, found '{line}'")));
            };
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::config(origin, &key, "unknown key"));
            }
            settings.entries.insert(key, (value.trim().to_string(), origin));
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>, origin: Origin) {
        self.entries.insert(key.to_string(), (value.into(), origin));
    }

    fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.entries.get(key)
    }

    fn parse<T>(&self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|(v, origin)| f(v).map_err(|msg| CliError::config(origin.clone(), key, msg)))
            .transpose()
    }

    fn origin(&self, key: &str) -> Origin {
        self.get(key).map_or(Origin::Flag, |(_, o)| o.clone())
    }
}

/// Period of the sought solution for `solve-point`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Period {
    TwoPi,
    FourPi,
}

impl Period {
    pub fn lambda1(self) -> u32 {
        match self {
            Period::TwoPi => 1,
            Period::FourPi => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub variant: Variant,
    pub branches: Vec<Branch>,
    pub delta_range: (f64, f64),
    pub eps_range: (f64, f64),
    /// Single ε for `solve-point`.
    pub epsilon: Option<f64>,
    /// `(nx, ny)` = (δ columns, ε rows).
    pub resolution: (usize, usize),
    pub order: usize,
    pub damping: f64,
    pub step: f64,
    pub period: Option<Period>,
    pub window: Option<(f64, f64)>,
    pub samples: usize,
    pub out: Option<PathBuf>,
    pub overlay: Vec<PathBuf>,
    pub workers: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub fast: bool,
    pub flip_jump_sign: bool,
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

/// `lo:hi` with `lo < hi`.
pub fn range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, found '{s}'"))?;
    let (a, b) = (number(a)?, number(b)?);
    if a < b {
        Ok((a, b))
    } else {
        Err(format!("empty range {a}:{b}"))
    }
}

/// `NXxNY`, both at least one.
pub fn resolution(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NXxNY, found '{s}'"))?;
    let (nx, ny) = (count(a)?, count(b)?);
    if nx == 0 || ny == 0 {
        return Err(format!("resolution {nx}x{ny} must be at least 1x1"));
    }
    Ok((nx, ny))
}

fn period(s: &str) -> Result<Period, String> {
    match s.trim() {
        "2pi" => Ok(Period::TwoPi),
        "4pi" => Ok(Period::FourPi),
        other => Err(format!("period must be 2pi or 4pi, found '{other}'")),
    }
}

fn branches(s: &str) -> Result<Vec<Branch>, String> {
    s.split(',')
        .map(|b| b.trim().parse::<Branch>().map_err(|e| e.to_string()))
        .collect()
}

/// Logical cores, capped by [`WORKERS_ENV`] when it holds a positive integer.
pub fn default_workers() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    env_cap().map_or(cores, |cap| cap.min(cores))
}

fn env_cap() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

impl RunConfig {
    /// Type and validate `settings` for `command`, filling defaults.
    pub fn from_settings(command: Command, settings: &Settings) -> Result<Self, CliError> {
        let variant = settings
            .parse("variant", |s| s.parse::<Variant>().map_err(|e| e.to_string()))?
            .unwrap_or(Variant::Classical);
        let order = settings.parse("order", count)?.unwrap_or(3);
        if order == 0 {
            return Err(CliError::config(settings.origin("order"), "order", "order must be at least 1"));
        }
        let period = settings.parse("period", period)?;
        let branches = match settings.parse("branch", branches)? {
            Some(b) => b,
            None => vec![match period {
                Some(Period::FourPi) => Branch::P4Left,
                Some(Period::TwoPi) => Branch::P2Left,
                None if command == Command::SolvePoint => Branch::P2Left,
                None => Branch::P4Left,
            }],
        };
        if let Some(p) = period {
            if let Some(b) = branches.iter().find(|b| b.lambda1() != p.lambda1()) {
                return Err(CliError::config(
                    settings.origin("branch"),
                    "branch",
                    format!("branch {b} does not have the requested period"),
                ));
            }
        }
        let (eps_range, epsilon) = match command {
            Command::SolvePoint => {
                let eps = settings
                    .parse("eps", number)?
                    .ok_or_else(|| CliError::config(Origin::Flag, "eps", "solve-point needs --eps"))?;
                ((eps, eps), Some(eps))
            }
            _ => (settings.parse("eps", range)?.unwrap_or((0.0, 4.5)), None),
        };
        let damping_default = if variant == Variant::Damped { 0.1 } else { 0.0 };
        let damping = settings.parse("damping", number)?.unwrap_or(damping_default);
        if damping < 0.0 {
            return Err(CliError::config(settings.origin("damping"), "damping", "damping must be non-negative"));
        }
        let step = settings.parse("step", number)?.unwrap_or(0.05);
        if step <= 0.0 {
            return Err(CliError::config(settings.origin("step"), "step", "step must be positive"));
        }
        let tol = settings.parse("tol", number)?.unwrap_or(1e-9);
        if tol <= 0.0 {
            return Err(CliError::config(settings.origin("tol"), "tol", "tol must be positive"));
        }
        let workers = match settings.parse("workers", count)? {
            Some(0) => return Err(CliError::config(settings.origin("workers"), "workers", "workers must be at least 1")),
            Some(n) => env_cap().map_or(n, |cap| n.min(cap)),
            None => default_workers(),
        };
        let overlay = settings
            .get("overlay")
            .map(|(v, _)| v.split(',').map(|p| PathBuf::from(p.trim())).collect())
            .unwrap_or_default();
        Ok(RunConfig {
            command,
            variant,
            branches,
            delta_range: settings.parse("delta", range)?.unwrap_or((-0.5, 2.1)),
            eps_range,
            epsilon,
            resolution: settings.parse("res", resolution)?.unwrap_or((780, 1350)),
            order,
            damping,
            step,
            period,
            window: settings.parse("window", range)?,
            samples: settings.parse("samples", count)?.unwrap_or(200).max(1),
            out: settings.get("out").map(|(v, _)| PathBuf::from(v)),
            overlay,
            workers,
            tol,
            max_iters: settings.parse("max_iters", count)?.unwrap_or(50),
            fast: false,
            flip_jump_sign: false,
        })
    }
}
