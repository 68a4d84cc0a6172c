//! The acceptance suite behind `verify`. Every row compares the HAM pipeline
//! against an oracle computed here: bisection on the RK monodromy, the
//! closed-form impulsive trace, or an independently transcribed expression.

use crate::commands::{point_report, pool};
use crate::io::Raster;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::time::{Duration, Instant};
use tonguetrace::floquet::{
    boundary_distance, excitation_monodromy, grid_scan, impulsive_trace, monodromy_with, ChartSpec, Oscillator,
    RkOptions,
};
use tonguetrace::galerkin::residual_signal;
use tonguetrace::ham::{resonant_content, run_expansion, run_expansion_in};
use tonguetrace::jet::Jet;
use tonguetrace::solver::{solve_point, trace_curve, CurvePoint, TraceOptions, AXIS_START};
use tonguetrace::{Branch, Freq, Kind, ProblemSpec, Signal, Start, UnknownVector, Variant};

const ANCHOR_2PI: f64 = 0.4802;
const ANCHOR_4PI: f64 = -0.1945;
const ANCHOR_TOL: f64 = 1e-3;
const ANCHOR_BUDGET: Duration = Duration::from_secs(10);
const ROOT_AGREEMENT: f64 = 1e-6;
const STRAIGHT_TOL: f64 = 1e-9;
const EMANATION_TOL: f64 = 1e-4;
const FLOQUET_TOL: f64 = 5e-3;
const PAIR_BUDGET: Duration = Duration::from_secs(120);
const SLOPE_TOL: f64 = 0.02;
const PRINTED_TOL: f64 = 1e-8;
const RMS_TOL: f64 = 0.05;
const CHART_BUDGET: Duration = Duration::from_secs(300);
const ALGEBRA_TOL: f64 = 1e-12;
const SECULAR_TOL: f64 = 1e-10;
const MONODROMY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Skip the full-resolution chart, the damped curves and the N=5 trace.
    pub fast: bool,
    /// Negative control: apply the impulse with the wrong sign in the RK
    /// oracle.
    pub flip_jump_sign: bool,
    pub workers: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Row {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {} ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub passed: bool,
    pub rows: Vec<Row>,
}

type Outcome = Result<(bool, String), String>;

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "impulsive 2pi anchor"),
    (2, "impulsive 4pi anchor"),
    (3, "straight-line branches"),
    (4, "tongue emanation"),
    (5, "oracle consistency along curves"),
    (6, "small-eps slope"),
    (7, "printed x3 regression"),
    (8, "solution vs integration"),
    (9, "chart regression"),
    (10, "property suites"),
];

pub fn run_one(id: u32, opts: &VerifyOptions) -> Row {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let outcome = match id {
        1 => impulsive_2pi_anchor(opts),
        2 => impulsive_4pi_anchor(),
        3 => straight_lines(),
        4 => emanation(),
        5 => floquet_along_curves(opts),
        6 => small_eps_slope(),
        7 => printed_regression(),
        8 => solution_vs_rk(opts),
        9 => chart_regression(opts),
        10 => property_suites(opts),
        _ => Err(format!("no criterion {id}")),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Row {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Run every criterion, calling `each` as rows complete.
pub fn run(opts: &VerifyOptions, mut each: impl FnMut(&Row)) -> Report {
    let rows: Vec<Row> = CRITERIA
        .iter()
        .map(|&(id, _)| {
            let row = run_one(id, opts);
            each(&row);
            row
        })
        .collect();
    Report {
        passed: rows.iter().all(|r| r.passed),
        rows,
    }
}

fn rk_options(opts: &VerifyOptions) -> RkOptions {
    RkOptions {
        flip_jump_sign: opts.flip_jump_sign,
        ..RkOptions::default()
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Sign change of `f` on `[guess − w, guess + w]` closest to `guess`.
pub fn root_near(f: impl Fn(f64) -> f64, guess: f64, w: f64, cells: usize) -> Option<f64> {
    let xs: Vec<f64> = (0..=cells).map(|i| guess - w + 2.0 * w * i as f64 / cells as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    (0..cells)
        .filter(|&i| fs[i].signum() != fs[i + 1].signum())
        .map(|i| bisect(&f, xs[i], xs[i + 1]))
        .min_by(|a, b| (a - guess).abs().total_cmp(&(b - guess).abs()))
}

fn boundary(variant: Variant, damping: f64, rk: &RkOptions) -> impl Fn(f64, f64) -> f64 + '_ {
    move |d, e| {
        boundary_distance(
            &monodromy_with(&Oscillator::new(variant, d, e, damping), 2.0 * PI, rk),
            variant,
        )
    }
}

fn anchor(branch: Branch, eps: f64) -> Result<(CurvePoint, Duration), String> {
    let start = Instant::now();
    let spec = branch.spec(Variant::Impulsive, 3, 0.0);
    let p = solve_point(&spec, branch, eps, None, &TraceOptions::new((AXIS_START, eps), 0.05))
        .map_err(|e| e.to_string())?;
    Ok((p, start.elapsed()))
}

fn impulsive_2pi_anchor(opts: &VerifyOptions) -> Outcome {
    let (p, took) = anchor(Branch::P2Left, 2.0)?;
    let closed = root_near(|d| impulsive_trace(d, 2.0).abs() - 2.0, 0.48, 0.1, 200)
        .ok_or("closed-form trace has no root near 0.48")?;
    let rk = rk_options(opts);
    let rk_root = root_near(|d| boundary(Variant::Impulsive, 0.0, &rk)(d, 2.0), 0.48, 0.1, 200);
    let gap = rk_root.map_or(f64::INFINITY, |r| (r - closed).abs());
    let ok = (p.delta - ANCHOR_2PI).abs() <= ANCHOR_TOL && gap <= ROOT_AGREEMENT && took < ANCHOR_BUDGET;
    Ok((
        ok,
        format!(
            "delta={:.6} (want {ANCHOR_2PI}+-{ANCHOR_TOL}), closed-form root {closed:.9}, RK root {}, gap {gap:.1e} (<= {ROOT_AGREEMENT:.0e}), solve {:.2}s",
            p.delta,
            rk_root.map_or("none".into(), |r| format!("{r:.9}")),
            took.as_secs_f64()
        ),
    ))
}

fn impulsive_4pi_anchor() -> Outcome {
    let (p, took) = anchor(Branch::P4Left, 1.0)?;
    let ok = (p.delta - ANCHOR_4PI).abs() <= ANCHOR_TOL && took < ANCHOR_BUDGET;
    Ok((
        ok,
        format!(
            "delta={:.6} (want {ANCHOR_4PI}+-{ANCHOR_TOL}), floquet_check {:.1e}, solve {:.2}s",
            p.delta,
            p.floquet_check,
            took.as_secs_f64()
        ),
    ))
}

fn spec_at(spec: &ProblemSpec, p: &CurvePoint) -> ProblemSpec {
    ProblemSpec {
        delta: p.delta,
        ..spec.clone().with_epsilon(p.epsilon)
    }
}

fn straight_lines() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (branch, level) in [(Branch::P4Right, 0.25), (Branch::P2Right, 1.0)] {
        let spec = branch.spec(Variant::Impulsive, 3, 0.0);
        let curve = trace_curve(&spec, branch, &TraceOptions::new((-4.0, 4.0), 0.05)).map_err(|e| e.to_string())?;
        let dev = curve.points.iter().map(|p| (p.delta - level).abs()).fold(0.0, f64::max);
        let mut nonempty = 0;
        for p in &curve.points {
            let s = spec_at(&spec, p);
            let x = run_expansion(&s, &p.unknowns()).map_err(|e| e.to_string())?.x_n;
            if !residual_signal(&s, &x).map_err(|e| e.to_string())?.is_empty() {
                nonempty += 1;
            }
        }
        let (lo, hi) = (curve.points[0].epsilon, curve.points[curve.points.len() - 1].epsilon);
        let covers = lo <= -4.0 && hi >= 4.0;
        ok &= dev <= STRAIGHT_TOL && nonempty == 0 && covers;
        detail.push(format!(
            "{branch}: {} points on [{lo}, {hi}], max |delta-{level}| {dev:.1e}, non-empty residuals {nonempty}",
            curve.points.len()
        ));
    }
    Ok((ok, detail.join("; ")))
}

/// Quadratic through the three smallest-ε points, evaluated at ε = 0.
fn extrapolate_to_axis(points: &[CurvePoint]) -> Option<f64> {
    let mut pts: Vec<_> = points.iter().map(|p| (p.epsilon, p.delta)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let p = pts.get(..3)?;
    Some(
        (0..3)
            .map(|i| {
                let w: f64 = (0..3).filter(|&j| j != i).map(|j| -p[j].0 / (p[i].0 - p[j].0)).product();
                w * p[i].1
            })
            .sum(),
    )
}

fn emanation() -> Outcome {
    let cases = [
        (Branch::P4Left, (0.001, 0.05), 0.001),
        (Branch::P4Right, (0.001, 0.05), 0.001),
        (Branch::P2Left, (0.001, 0.05), 0.001),
        (Branch::P2Right, (0.001, 0.05), 0.001),
        (Branch::P2Zero, (0.01, 0.5), 0.01),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (branch, range, step) in cases {
        let spec = branch.spec(Variant::Classical, 3, 0.0);
        let line = match trace_curve(&spec, branch, &TraceOptions::new(range, step)) {
            Ok(c) => {
                let d0 = extrapolate_to_axis(&c.points).unwrap_or(f64::NAN);
                let err = (d0 - branch.emanation()).abs();
                ok &= err <= EMANATION_TOL;
                format!("{branch} -> {d0:.7} (err {err:.1e}, from eps>={})", c.points[0].epsilon)
            }
            Err(e) => {
                ok = false;
                format!("{branch}: {e}")
            }
        };
        detail.push(line);
    }
    Ok((ok, detail.join("; ")))
}

struct Family {
    label: &'static str,
    variant: Variant,
    order: usize,
    damping: f64,
    branch: Branch,
    range: (f64, f64),
}

fn floquet_along_curves(opts: &VerifyOptions) -> Outcome {
    let fam = |label, variant, order, damping, branch, range| Family {
        label,
        variant,
        order,
        damping,
        branch,
        range,
    };
    use Branch::*;
    use Variant::*;
    let classical = (0.05, 4.5);
    let mut families = vec![
        fam("classical", Classical, 3, 0.0, P4Left, classical),
        fam("classical", Classical, 3, 0.0, P4Right, classical),
    ];
    if !opts.fast {
        families.extend([
            fam("classical", Classical, 3, 0.0, P2Left, classical),
            fam("classical", Classical, 3, 0.0, P2Right, classical),
            fam("classical", Classical, 3, 0.0, P2Zero, classical),
            fam("impulsive", Impulsive, 3, 0.0, P2Right, (-4.0, 4.0)),
            fam("impulsive", Impulsive, 3, 0.0, P4Right, (-4.0, 4.0)),
            fam("impulsive", Impulsive, 3, 0.0, P2Left, (0.05, 4.0)),
            fam("impulsive", Impulsive, 3, 0.0, P4Left, (0.05, 4.0)),
            fam("impulsive", Impulsive, 3, 0.0, P2Zero, (0.05, 4.0)),
            fam("damped c=0.1", Damped, 4, 0.1, P2Left, classical),
            fam("damped c=0.1", Damped, 4, 0.1, P2Right, classical),
            fam("damped c=0.1", Damped, 4, 0.1, P4Left, classical),
            fam("damped c=0.1", Damped, 4, 0.1, P4Right, classical),
        ]);
    }
    let results: Vec<_> = pool(opts.workers).install(|| {
        families
            .par_iter()
            .map(|f| {
                let start = Instant::now();
                let spec = f.branch.spec(f.variant, f.order, f.damping);
                let res = trace_curve(&spec, f.branch, &TraceOptions::new(f.range, 0.05));
                (res, start.elapsed())
            })
            .collect()
    });
    let mut ok = true;
    let mut pair_time = Duration::ZERO;
    let mut detail = Vec::new();
    for (f, (res, took)) in families.iter().zip(results) {
        if f.variant == Classical && matches!(f.branch, P4Left | P4Right) {
            pair_time += took;
        }
        match res {
            Ok(c) => {
                let bad = c.points.iter().filter(|p| p.floquet_check >= FLOQUET_TOL).count();
                let worst = c.points.iter().max_by(|a, b| a.floquet_check.total_cmp(&b.floquet_check));
                let (we, wf) = worst.map_or((f64::NAN, f64::NAN), |p| (p.epsilon, p.floquet_check));
                let (lo, hi) = (c.points[0].epsilon, c.points[c.points.len() - 1].epsilon);
                ok &= bad == 0;
                detail.push(format!(
                    "{} {} N={} eps [{lo:.3}, {hi:.3}]: {} pts, {bad} over tol, worst {wf:.1e} at eps {we:.2}",
                    f.label,
                    f.branch,
                    f.order,
                    c.points.len()
                ));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("{} {} N={}: not traced ({e})", f.label, f.branch, f.order));
            }
        }
    }
    ok &= pair_time < PAIR_BUDGET;
    detail.push(format!("classical N=3 4pi pair traced in {:.1}s", pair_time.as_secs_f64()));
    Ok((ok, detail.join("; ")))
}

fn small_eps_slope() -> Outcome {
    let (e1, e2) = (0.019, 0.021);
    let mut ok = true;
    let mut detail = Vec::new();
    let rk = RkOptions::default();
    let bd = boundary(Variant::Classical, 0.0, &rk);
    for (branch, want) in [(Branch::P4Left, -0.5), (Branch::P4Right, 0.5)] {
        let spec = branch.spec(Variant::Classical, 3, 0.0);
        let opts = TraceOptions::new((e1, e2), 0.001);
        let d = |e: f64| solve_point(&spec, branch, e, None, &opts).map(|p| p.delta).map_err(|e| e.to_string());
        let (d1, d2) = (d(e1)?, d(e2)?);
        let slope = (d2 - d1) / (e2 - e1);
        let t1 = root_near(|x| bd(x, e1), d1, 0.005, 50).ok_or("no Floquet root")?;
        let t2 = root_near(|x| bd(x, e2), d2, 0.005, 50).ok_or("no Floquet root")?;
        let oracle = (t2 - t1) / (e2 - e1);
        ok &= (slope - want).abs() <= SLOPE_TOL && (oracle - want).abs() <= SLOPE_TOL;
        detail.push(format!("{branch}: slope {slope:.5}, Floquet bisection {oracle:.5} (want {want:+})"));
    }
    Ok((ok, detail.join("; ")))
}

/// The printed third-order impulsive 2π solution, transcribed term by term.
/// `h1h2_over` is the denominator multiplying `π` in the `h1·h2` part of the
/// gated `sin t` coefficient (12 as printed).
pub fn printed_x3_value(t: f64, dd: f64, e: f64, h1: f64, h2: f64, h3: f64, h1h2_over: f64) -> f64 {
    let gate = if t >= PI { 1.0 } else { 0.0 };
    let (c, s) = (t.cos(), t.sin());
    let k = 2.0 * PI * dd + e;
    let p2 = PI * PI;
    c - e * e * h1 / 2.0 * (3.0 * h1 + h2 + k * h1 * h1 / PI) * c * gate
        + e * (3.0 * h1
            + h2
            + h3 / 6.0
            + (6.0 * PI * dd + 3.0 * e) * h1 * h1 / (2.0 * PI)
            + k * h1 * h2 / (h1h2_over * PI)
            + ((1.0 - p2) * e * e + 4.0 * PI * dd * (PI * dd + e)) * h1.powi(3) / (4.0 * p2))
            * s
            * gate
        - e / (2.0 * PI)
            * (3.0 * h1
                + h2
                + h3 / 6.0
                + 3.0 * k * h1 * h1 / (2.0 * PI)
                + k * h1 * h2 / (2.0 * PI)
                + (12.0 * PI * dd * (PI * dd + e) + (3.0 - p2) * e * e) * h1.powi(3) / (12.0 * p2))
            * t
            * s
        + e * e * (k * h1.powi(3) / (2.0 * p2) + 3.0 * h1 * h1 / (2.0 * PI) + h1 * h2 / (2.0 * PI)) * t * c * gate
        + e.powi(3) * h1.powi(3) / (4.0 * PI) * t * s * gate
        - e * e * h1 / (8.0 * p2) * (3.0 * h1 + h2 + k * h1 * h1 / PI) * t * t * c
        - e.powi(3) * h1.powi(3) / (8.0 * p2) * t * t * s * gate
        + e.powi(3) * h1.powi(3) / (48.0 * PI.powi(3)) * t.powi(3) * s
}

fn printed_regression() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x78_33);
    let (mut literal, mut corrected) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let dd = rng.gen_range(0.0..1.5);
        let e = rng.gen_range(0.2..3.0);
        let h: Vec<f64> = vec![
            rng.gen_range(-2.0..0.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let spec = ProblemSpec::impulsive(1, Start::Cos, 3).with_epsilon(e).with_delta(dd);
        let x = run_expansion(&spec, &UnknownVector::new(dd, h.clone()))
            .map_err(|e| e.to_string())?
            .x_n;
        for _ in 0..100 {
            let t = rng.gen_range(0.0..2.0 * PI);
            let ours = x.eval(t);
            literal = literal.max((ours - printed_x3_value(t, dd, e, h[0], h[1], h[2], 12.0)).abs());
            corrected = corrected.max((ours - printed_x3_value(t, dd, e, h[0], h[1], h[2], 2.0)).abs());
        }
    }
    Ok((
        literal < PRINTED_TOL,
        format!(
            "max |x3 - printed| {literal:.2e} (tol {PRINTED_TOL:.0e}); with the h1*h2/(12 pi) term read as /(2 pi): {corrected:.2e}"
        ),
    ))
}

fn solution_vs_rk(opts: &VerifyOptions) -> Outcome {
    let rk = rk_options(opts);
    let mut ok = true;
    let mut detail = Vec::new();
    for (branch, eps) in [(Branch::P2Left, 2.0), (Branch::P4Left, 1.0)] {
        let spec = branch.spec(Variant::Impulsive, 3, 0.0);
        let r = point_report(&spec, branch, eps, None, &TraceOptions::new((AXIS_START, eps), 0.05), 200, &rk)
            .map_err(|e| e.to_string())?;
        ok &= r.rms_difference < RMS_TOL;
        detail.push(format!(
            "{branch} eps={eps} delta={:.5}: RMS {:.2e} over [0, {:.3}]",
            r.point.delta, r.rms_difference, r.period
        ));
    }
    Ok((ok, detail.join("; ")))
}

pub fn desk_chart_spec() -> ChartSpec {
    ChartSpec {
        variant: Variant::Classical,
        delta_range: (-0.5, 2.1),
        eps_range: (0.0, 4.5),
        nx: 78,
        ny: 135,
        damping: 0.0,
    }
}

fn chart_regression(opts: &VerifyOptions) -> Outcome {
    let spec = desk_chart_spec();
    let render = |w: usize| Raster::from_chart(&grid_scan(&spec, w)).to_pgm();
    let reference = render(1);
    let runs = [1, 2, 4, opts.workers.max(1)];
    let identical = runs.iter().all(|&w| render(w) == reference);
    let mut detail = format!(
        "78x135 PGM ({} bytes) identical across workers {runs:?}: {identical}",
        reference.len()
    );
    let mut ok = identical;
    if !opts.fast {
        let full = ChartSpec {
            nx: 780,
            ny: 1350,
            ..spec
        };
        let workers = opts.workers.clamp(1, 8);
        let start = Instant::now();
        let chart = grid_scan(&full, workers);
        let took = start.elapsed();
        ok &= took < CHART_BUDGET && chart.cells.len() == 780 * 1350;
        detail.push_str(&format!(
            "; 780x1350 chart in {:.1}s on {workers} worker(s) (budget {}s on 8)",
            took.as_secs_f64(),
            CHART_BUDGET.as_secs()
        ));
    }
    Ok((ok, detail))
}

fn random_signal(rng: &mut StdRng) -> Signal<f64> {
    let freqs = [Freq::new(0, 1), Freq::new(1, 2), Freq::new(1, 1), Freq::new(3, 2), Freq::new(2, 1)];
    (0..4).fold(Signal::zero(), |acc, _| {
        let f = freqs[rng.gen_range(0..freqs.len())];
        let kind = if *f.numer() == 0 {
            Kind::Const
        } else if rng.gen_bool(0.5) {
            Kind::Cos
        } else {
            Kind::Sin
        };
        let step = rng.gen_bool(0.3).then_some(PI);
        acc.add(&Signal::term(rng.gen_range(-2.0..2.0), rng.gen_range(0..3), kind, f, step))
    })
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0)
}

struct Check {
    name: &'static str,
    worst: f64,
    tol: f64,
}

fn signal_checks(rng: &mut StdRng) -> Result<Vec<Check>, String> {
    let (mut closure, mut calculus, mut residual) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let (a, b) = (random_signal(rng), random_signal(rng));
        let prod = a.mul(&b).map_err(|e| e.to_string())?;
        let sum = a.add(&b);
        let back = a.integral_from_zero().differentiate().map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let t = rng.gen_range(0.0..4.0 * PI);
            let scale = (1.0 + t).powi(4) * (1.0 + a.max_coeff()) * (1.0 + b.max_coeff());
            closure = closure
                .max(rel(prod.eval(t), a.eval(t) * b.eval(t), scale))
                .max(rel(sum.eval(t), a.eval(t) + b.eval(t), scale));
            if (t - PI).abs() > 1e-9 {
                calculus = calculus.max(rel(back.eval(t), a.eval(t), scale));
            }
        }
    }
    for _ in 0..10 {
        let (dd, e) = (rng.gen_range(-0.5..2.0), rng.gen_range(0.0..3.0));
        let u = UnknownVector::new(dd, vec![-1.0, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.1]);
        for variant in [Variant::Classical, Variant::Impulsive] {
            let spec = ProblemSpec::new(variant, 1, Start::Cos, 3).with_epsilon(e).with_delta(dd);
            let x = run_expansion(&spec, &u).map_err(|e| e.to_string())?.x_n;
            let r = residual_signal(&spec, &x).map_err(|e| e.to_string())?;
            let ddx = x.differentiate().and_then(|d| d.differentiate()).map_err(|e| e.to_string())?;
            for _ in 0..20 {
                let t = rng.gen_range(0.0..2.0 * PI);
                let q = match variant {
                    Variant::Impulsive => dd,
                    _ => dd + e * t.cos(),
                };
                let scale = x.max_coeff() * (1.0 + t).powi(4);
                residual = residual.max(rel(r.eval(t), ddx.eval(t) + q * x.eval(t), scale));
            }
            if variant == Variant::Impulsive {
                // The kink in x at the impulse puts a Dirac mass in x'' too.
                let want = ddx.impulse_at(PI) + e * x.eval(PI);
                residual = residual.max(rel(r.impulse_at(PI), want, x.max_coeff()));
            }
        }
    }
    Ok(vec![
        Check {
            name: "signal product/sum closure",
            worst: closure,
            tol: ALGEBRA_TOL,
        },
        Check {
            name: "integrate-differentiate round trip",
            worst: calculus,
            tol: ALGEBRA_TOL,
        },
        Check {
            name: "residual signal vs pointwise ODE",
            worst: residual,
            tol: ALGEBRA_TOL,
        },
    ])
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn jet_check(rng: &mut StdRng) -> Result<Check, String> {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = Jet::new((0..7).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>());
        let b = Jet::new((0..7).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>());
        let ab = a.mul(&b).map_err(|e| e.to_string())?;
        for n in 0..=6 {
            let leibniz: f64 = (0..=n)
                .map(|k| binomial(n, k) * a.derivative(k) * b.derivative(n - k))
                .sum();
            let scale: f64 = (0..=n)
                .map(|k| binomial(n, k) * (a.derivative(k) * b.derivative(n - k)).abs())
                .sum();
            worst = worst.max(rel(ab.derivative(n), leibniz, scale));
        }
    }
    Ok(Check {
        name: "jet Leibniz rule",
        worst,
        tol: ALGEBRA_TOL,
    })
}

fn secular_check(rng: &mut StdRng) -> Result<Check, String> {
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let (dd, e) = (rng.gen_range(-0.5..2.0), rng.gen_range(0.0..3.0));
        let h: Vec<f64> = (0..5).map(|i| rng.gen_range(-2.0..1.0) / (i + 1) as f64).collect();
        let u = UnknownVector::new(dd, h);
        let specs = [
            ProblemSpec::classical(1, Start::Cos, 4),
            ProblemSpec::classical(2, Start::Sin, 4),
            ProblemSpec::impulsive(1, Start::Cos, 4),
            ProblemSpec::impulsive(2, Start::Sin, 4),
            Branch::P2Right.spec(Variant::Damped, 4, 0.1),
        ];
        for spec in specs {
            let spec = spec.with_epsilon(e).with_delta(dd);
            let sol = run_expansion_in::<num_complex::Complex64>(&spec, &u).map_err(|e| e.to_string())?;
            for f in &sol.forcings {
                let (c, s) = resonant_content(&spec, f).map_err(|e| e.to_string())?;
                worst = worst.max((c.norm() + s.norm()) / (1.0 + f.max_coeff()));
            }
        }
    }
    Ok(Check {
        name: "resolved forcings secular-free",
        worst,
        tol: SECULAR_TOL,
    })
}

fn monodromy_checks(rng: &mut StdRng, rk: &RkOptions) -> Vec<Check> {
    let (mut det, mut trace) = (0.0f64, 0.0f64);
    for _ in 0..40 {
        let (d, e, c) = (rng.gen_range(-1.0..3.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..0.5));
        let m = excitation_monodromy(&Oscillator::new(Variant::Damped, d, e, c));
        det = det.max((m.det() - (-2.0 * PI * c).exp()).abs());
        let (dd, ei) = (rng.gen_range(-0.5..2.5), rng.gen_range(-4.0..4.0));
        let closed = impulsive_trace(dd, ei);
        let m = monodromy_with(&Oscillator::new(Variant::Impulsive, dd, ei, 0.0), 2.0 * PI, rk);
        trace = trace.max(rel(m.trace(), closed, closed.abs()));
    }
    vec![
        Check {
            name: "damped det(M) = exp(-2 pi c)",
            worst: det,
            tol: MONODROMY_TOL,
        },
        Check {
            name: "impulsive closed-form trace vs RK",
            worst: trace,
            tol: MONODROMY_TOL,
        },
    ]
}

/// Largest Floquet check on `[3, 4.5]` for classical p2-right at order `n`.
fn p2_right_worst(order: usize) -> Result<f64, String> {
    let spec = Branch::P2Right.spec(Variant::Classical, order, 0.0);
    let c = trace_curve(&spec, Branch::P2Right, &TraceOptions::new((0.05, 4.5), 0.05)).map_err(|e| e.to_string())?;
    Ok(c.points
        .iter()
        .filter(|p| p.epsilon >= 3.0)
        .map(|p| p.floquet_check)
        .fold(0.0, f64::max))
}

fn property_suites(opts: &VerifyOptions) -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut checks = signal_checks(&mut rng)?;
    checks.push(jet_check(&mut rng)?);
    checks.push(secular_check(&mut rng)?);
    checks.extend(monodromy_checks(&mut rng, &rk_options(opts)));
    let mut ok = checks.iter().all(|c| c.worst <= c.tol);
    let mut detail: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {:.1e} (tol {:.0e})", c.name, c.worst, c.tol))
        .collect();
    if opts.fast {
        detail.push("N=5 vs N=3 comparison skipped (--fast)".into());
    } else {
        let (n3, n5) = (p2_right_worst(3)?, p2_right_worst(5)?);
        ok &= n5 <= n3;
        detail.push(format!("p2-right max floquet_check on eps [3, 4.5]: N=3 {n3:.1e}, N=5 {n5:.1e}"));
    }
    Ok((ok, detail.join("; ")))
}
