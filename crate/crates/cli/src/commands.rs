//! Pipeline orchestration behind each subcommand.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, ChartMeta, PointReport, Raster};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use tonguetrace::floquet::{grid_scan, trajectory, ChartSpec, RkOptions};
use tonguetrace::ham::HamScalar;
use tonguetrace::solver::{solve_point, trace_curve, AlgebraicSystem, NewtonOptions, TraceOptions, TransitionCurve};
use tonguetrace::{Branch, FieldMode, ProblemSpec, UnknownVector};

pub fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
}

pub fn chart_spec(cfg: &RunConfig) -> ChartSpec {
    ChartSpec {
        variant: cfg.variant,
        delta_range: cfg.delta_range,
        eps_range: cfg.eps_range,
        nx: cfg.resolution.0,
        ny: cfg.resolution.1,
        damping: cfg.damping,
    }
}

pub fn trace_options(cfg: &RunConfig) -> TraceOptions {
    TraceOptions {
        newton: NewtonOptions {
            tol: cfg.tol,
            max_iters: cfg.max_iters,
            ..NewtonOptions::default()
        },
        ..TraceOptions::new(cfg.eps_range, cfg.step)
    }
}

/// Stability raster with every overlay curve drawn on top.
pub fn render_chart(cfg: &RunConfig) -> Result<(Raster, ChartMeta), CliError> {
    let spec = chart_spec(cfg);
    let curves = cfg
        .overlay
        .iter()
        .map(|p| io::read_curve_csv(p))
        .collect::<Result<Vec<_>, _>>()?;
    let chart = grid_scan(&spec, cfg.workers);
    let mut raster = Raster::from_chart(&chart);
    for c in &curves {
        let pts: Vec<_> = c.iter().map(|p| (p.delta, p.epsilon)).collect();
        raster.overlay(&spec, &pts);
    }
    let meta = ChartMeta {
        spec,
        unstable_cells: chart.unstable_count(),
        overlays: cfg.overlay.iter().map(|p| p.display().to_string()).collect(),
    };
    Ok((raster, meta))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn cmd_chart(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("chart.pgm"));
    let (raster, meta) = render_chart(cfg)?;
    io::write_file(&out, &raster.to_pgm())?;
    io::write_file(&sidecar(&out), io::to_json(&meta).as_bytes())?;
    eprintln!(
        "wrote {} ({}x{}, {} unstable cells)",
        out.display(),
        raster.width,
        raster.height,
        meta.unstable_cells
    );
    Ok(())
}

/// Trace every configured branch, in parallel across branches.
pub fn trace_branches(cfg: &RunConfig) -> Vec<(Branch, tonguetrace::Result<TransitionCurve>)> {
    let opts = trace_options(cfg);
    pool(cfg.workers).install(|| {
        cfg.branches
            .par_iter()
            .map(|&b| {
                let spec = b.spec(cfg.variant, cfg.order, cfg.damping);
                (b, trace_curve(&spec, b, &opts))
            })
            .collect()
    })
}

/// `curve.csv` for one branch, `curve.<branch>.csv` for several.
pub fn trace_path(out: &Path, branch: Branch, many: bool) -> PathBuf {
    if !many {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map_or_else(|| "curve".into(), |s| s.to_string_lossy().into_owned());
    let ext = out.extension().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{}.{ext}", branch.id()))
}

pub fn cmd_trace(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("curve.csv"));
    let many = cfg.branches.len() > 1;
    let mut first_err = None;
    for (b, res) in trace_branches(cfg) {
        match res {
            Ok(curve) => {
                let path = trace_path(&out, b, many);
                io::write_file(&path, io::curve_csv_string(&curve.points).as_bytes())?;
                let worst = curve.points.iter().map(|p| p.floquet_check).fold(0.0, f64::max);
                eprintln!(
                    "{b}: {} points -> {} (max floquet_check {worst:.2e})",
                    curve.points.len(),
                    path.display()
                );
            }
            Err(source) => {
                eprintln!("{b}: {source}");
                first_err.get_or_insert(CliError::Branch {
                    branch: b.id().to_string(),
                    source,
                });
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn sample_in<S: HamScalar>(sys: &AlgebraicSystem, u: &UnknownVector, ts: &[f64]) -> tonguetrace::Result<(Vec<f64>, f64, f64)> {
    let x = sys.expansion::<S>(u)?.x_n;
    let v0 = x.differentiate().map_err(tonguetrace::Error::from)?.eval(0.0).re();
    Ok((ts.iter().map(|&t| x.eval(t).re()).collect(), x.eval(0.0).re(), v0))
}

/// Converged point plus `x_N(t)` and the RK solution from the same initial
/// condition over one solution period.
pub fn point_report(
    spec: &ProblemSpec,
    branch: Branch,
    eps: f64,
    window: Option<(f64, f64)>,
    opts: &TraceOptions,
    samples: usize,
    rk: &RkOptions,
) -> Result<PointReport, CliError> {
    let point = solve_point(spec, branch, eps, window, opts)?;
    let sys = AlgebraicSystem::new(spec.clone().with_epsilon(eps), (point.delta - 1.0, point.delta + 1.0))?;
    let u = point.unknowns();
    let (_, x0, v0) = match spec.field_mode {
        FieldMode::Real => sample_in::<f64>(&sys, &u, &[])?,
        FieldMode::Complex => sample_in::<Complex64>(&sys, &u, &[])?,
    };
    let period = 2.0 * PI * f64::from(spec.lambda1);
    let path = trajectory(&sys.oscillator(point.delta), x0, v0, period, samples, rk);
    let t: Vec<f64> = path.iter().map(|&(t, _)| t).collect();
    let x_rk: Vec<f64> = path.iter().map(|&(_, x)| x).collect();
    let (x_series, _, _) = match spec.field_mode {
        FieldMode::Real => sample_in::<f64>(&sys, &u, &t)?,
        FieldMode::Complex => sample_in::<Complex64>(&sys, &u, &t)?,
    };
    let rms = (x_series.iter().zip(&x_rk).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / t.len() as f64).sqrt();
    Ok(PointReport {
        variant: spec.variant,
        branch,
        order: spec.order,
        damping: spec.damping,
        point,
        period,
        initial_condition: (x0, v0),
        t,
        x_series,
        x_rk,
        rms_difference: rms,
    })
}

pub fn cmd_solve_point(cfg: &RunConfig) -> Result<(), CliError> {
    let branch = cfg.branches[0];
    let eps = cfg.epsilon.expect("validated");
    let spec = branch.spec(cfg.variant, cfg.order, cfg.damping);
    let rk = RkOptions {
        flip_jump_sign: cfg.flip_jump_sign,
        ..RkOptions::default()
    };
    let report = point_report(&spec, branch, eps, cfg.window, &trace_options(cfg), cfg.samples, &rk)?;
    let json = io::to_json(&report);
    match &cfg.out {
        Some(path) => {
            io::write_file(path, json.as_bytes())?;
            eprintln!(
                "{branch} at eps={eps}: delta={:.10} (rms vs RK {:.2e}) -> {}",
                report.point.delta,
                report.rms_difference,
                path.display()
            );
        }
        None => println!("{json}"),
    }
    Ok(())
}
