//! Monodromy matrices by fixed-step RK4, Floquet classification and
//! stability charts.

use crate::problem::Variant;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const STEPS_PER_PERIOD: usize = 2000;
const CLASSIFY_SLACK: f64 = 1e-9;

/// `ẍ + cẋ + q(t)x = 0` with `q = δ + ε cos t` or `q = Δ + ε Σ δ(t − (2k+1)π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub variant: Variant,
    pub delta: f64,
    pub epsilon: f64,
    pub damping: f64,
}

impl Oscillator {
    pub fn new(variant: Variant, delta: f64, epsilon: f64, damping: f64) -> Self {
        Oscillator {
            variant,
            delta,
            epsilon,
            damping,
        }
    }

    fn is_damped(&self) -> bool {
        self.variant == Variant::Damped
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RkOptions {
    /// Steps per `2π`; must be even so impulses at odd multiples of `π`
    /// fall on step boundaries.
    pub steps_per_2pi: usize,
    /// Apply the impulse jump with the wrong sign (negative control).
    pub flip_jump_sign: bool,
}

impl Default for RkOptions {
    fn default() -> Self {
        RkOptions {
            steps_per_2pi: STEPS_PER_PERIOD,
            flip_jump_sign: false,
        }
    }
}

/// Columns are the solutions at `t = T` from `(1, 0)` and `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyMatrix {
    pub m: [[f64; 2]; 2],
}

impl MonodromyMatrix {
    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn multipliers(&self) -> [Complex64; 2] {
        let tr = self.trace();
        let disc = Complex64::new(tr * tr - 4.0 * self.det(), 0.0).sqrt();
        [(tr + disc) / 2.0, (tr - disc) / 2.0]
    }

    pub fn max_multiplier(&self) -> f64 {
        let [a, b] = self.multipliers();
        a.norm().max(b.norm())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Per-step samples of `q(t)` at `t_k`, `t_k + h/2`, `t_k + h`.
struct Coefficient {
    half_steps: Vec<f64>,
}

impl Coefficient {
    fn new(osc: &Oscillator, steps: usize, h: f64) -> Self {
        let half_steps = match osc.variant {
            Variant::Impulsive => vec![osc.delta; 2 * steps + 1],
            _ => (0..=2 * steps)
                .map(|i| osc.delta + osc.epsilon * (i as f64 * h / 2.0).cos())
                .collect(),
        };
        Coefficient { half_steps }
    }
}

type State = [[f64; 2]; 2];

#[inline]
fn rhs(x: &State, q: f64, c: f64) -> State {
    [
        [x[1][0], x[1][1]],
        [-q * x[0][0] - c * x[1][0], -q * x[0][1] - c * x[1][1]],
    ]
}

#[inline]
fn axpy(x: &State, a: f64, k: &State) -> State {
    [
        [x[0][0] + a * k[0][0], x[0][1] + a * k[0][1]],
        [x[1][0] + a * k[1][0], x[1][1] + a * k[1][1]],
    ]
}

pub fn monodromy(osc: &Oscillator, period: f64) -> MonodromyMatrix {
    monodromy_with(osc, period, &RkOptions::default())
}

pub fn monodromy_with(osc: &Oscillator, period: f64, opts: &RkOptions) -> MonodromyMatrix {
    MonodromyMatrix {
        m: propagate(osc, period, opts, |_, _| {}),
    }
}

/// Fundamental matrix after each step; `visit(k, Φ(t_k))` sees every step
/// boundary including `k = 0`. Jumps are applied before the visit.
fn propagate(osc: &Oscillator, period: f64, opts: &RkOptions, mut visit: impl FnMut(usize, &State)) -> State {
    let steps = step_count(period, opts);
    let h = period / steps as f64;
    let coef = Coefficient::new(osc, steps, h);
    let c = if osc.is_damped() { osc.damping } else { 0.0 };
    let half = opts.steps_per_2pi / 2;
    let jump = if opts.flip_jump_sign { osc.epsilon } else { -osc.epsilon };
    let mut x: State = [[1.0, 0.0], [0.0, 1.0]];
    visit(0, &x);
    for k in 0..steps {
        let (q0, q1, q2) = (
            coef.half_steps[2 * k],
            coef.half_steps[2 * k + 1],
            coef.half_steps[2 * k + 2],
        );
        let k1 = rhs(&x, q0, c);
        let k2 = rhs(&axpy(&x, h / 2.0, &k1), q1, c);
        let k3 = rhs(&axpy(&x, h / 2.0, &k2), q1, c);
        let k4 = rhs(&axpy(&x, h, &k3), q2, c);
        for r in 0..2 {
            for col in 0..2 {
                x[r][col] += h / 6.0 * (k1[r][col] + 2.0 * k2[r][col] + 2.0 * k3[r][col] + k4[r][col]);
            }
        }
        let done = k + 1;
        if osc.variant == Variant::Impulsive && done % half == 0 && (done / half) % 2 == 1 {
            for col in 0..2 {
                x[1][col] += jump * x[0][col];
            }
        }
        visit(done, &x);
    }
    x
}

fn step_count(period: f64, opts: &RkOptions) -> usize {
    (opts.steps_per_2pi as f64 * period / (2.0 * PI)).round() as usize
}

/// `x(t)` from `(x0, v0)` at `samples + 1` equally spaced times on
/// `[0, period]`. Sample times are snapped to RK step boundaries, so
/// `samples` should divide the step count.
pub fn trajectory(osc: &Oscillator, x0: f64, v0: f64, period: f64, samples: usize, opts: &RkOptions) -> Vec<(f64, f64)> {
    let steps = step_count(period, opts);
    let samples = samples.max(1);
    let mut out = Vec::with_capacity(samples + 1);
    let mut next = 0;
    propagate(osc, period, opts, |k, phi| {
        while next <= samples && next * steps / samples == k {
            let t = period * k as f64 / steps as f64;
            out.push((t, phi[0][0] * x0 + phi[0][1] * v0));
            next += 1;
        }
    });
    out
}

/// Monodromy over the excitation period `2π`.
pub fn excitation_monodromy(osc: &Oscillator) -> MonodromyMatrix {
    monodromy(osc, 2.0 * PI)
}

pub fn classify(m: &MonodromyMatrix, variant: Variant) -> Stability {
    let unstable = match variant {
        Variant::Damped => m.max_multiplier() > 1.0 + CLASSIFY_SLACK,
        _ => m.trace().abs() > 2.0 + CLASSIFY_SLACK,
    };
    if unstable {
        Stability::Unstable
    } else {
        Stability::Stable
    }
}

/// Signed distance from the stability boundary: `|tr M| − 2` (undamped) or
/// `max|μ| − 1` (damped).
pub fn boundary_distance(m: &MonodromyMatrix, variant: Variant) -> f64 {
    match variant {
        Variant::Damped => m.max_multiplier() - 1.0,
        _ => m.trace().abs() - 2.0,
    }
}

/// `|boundary_distance|` of the `2π` monodromy; zero on a transition curve.
pub fn floquet_check(osc: &Oscillator) -> f64 {
    boundary_distance(&excitation_monodromy(osc), osc.variant).abs()
}

/// Closed-form trace of the impulsive monodromy: half-period propagation,
/// kick `v ↦ v − εx`, half-period propagation.
pub fn impulsive_trace(delta: f64, eps: f64) -> f64 {
    let (c, s_over_w) = if delta > 0.0 {
        let w = delta.sqrt();
        ((2.0 * PI * w).cos(), (2.0 * PI * w).sin() / w)
    } else if delta < 0.0 {
        let w = (-delta).sqrt();
        ((2.0 * PI * w).cosh(), (2.0 * PI * w).sinh() / w)
    } else {
        (1.0, 2.0 * PI)
    };
    2.0 * c - eps * s_over_w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub variant: Variant,
    pub delta_range: (f64, f64),
    pub eps_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub damping: f64,
}

impl ChartSpec {
    /// Cell-centre `δ` of column `i`.
    pub fn delta_at(&self, i: usize) -> f64 {
        let (a, b) = self.delta_range;
        a + (b - a) * (i as f64 + 0.5) / self.nx as f64
    }

    /// Cell-centre `ε` of row `j` (row 0 is the smallest `ε`).
    pub fn eps_at(&self, j: usize) -> f64 {
        let (a, b) = self.eps_range;
        a + (b - a) * (j as f64 + 0.5) / self.ny as f64
    }

    /// Cell containing `(δ, ε)`, if inside the chart.
    pub fn cell_of(&self, delta: f64, eps: f64) -> Option<(usize, usize)> {
        let fx = (delta - self.delta_range.0) / (self.delta_range.1 - self.delta_range.0);
        let fy = (eps - self.eps_range.0) / (self.eps_range.1 - self.eps_range.0);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        Some(((fx * self.nx as f64) as usize, (fy * self.ny as f64) as usize))
    }
}

/// Row-major raster, `δ` fastest, row 0 at the smallest `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityChart {
    pub spec: ChartSpec,
    pub cells: Vec<Stability>,
}

impl StabilityChart {
    pub fn at(&self, i: usize, j: usize) -> Stability {
        self.cells[j * self.spec.nx + i]
    }

    pub fn unstable_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Stability::Unstable).count()
    }

    /// Whether cell `(i, j)` has a 4-neighbour of the opposite class.
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        let here = self.at(i, j);
        let (nx, ny) = (self.spec.nx as i64, self.spec.ny as i64);
        [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|&(dx, dy)| {
            let (x, y) = (i as i64 + dx, j as i64 + dy);
            (0..nx).contains(&x) && (0..ny).contains(&y) && self.at(x as usize, y as usize) != here
        })
    }
}

/// Classify every cell centre. Output does not depend on `workers`.
pub fn grid_scan(chart: &ChartSpec, workers: usize) -> StabilityChart {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let rows: Vec<Vec<Stability>> = pool.install(|| {
        (0..chart.ny)
            .into_par_iter()
            .map(|j| {
                let eps = chart.eps_at(j);
                (0..chart.nx)
                    .map(|i| {
                        let osc = Oscillator::new(chart.variant, chart.delta_at(i), eps, chart.damping);
                        classify(&excitation_monodromy(&osc), chart.variant)
                    })
                    .collect()
            })
            .collect()
    });
    StabilityChart {
        spec: chart.clone(),
        cells: rows.into_iter().flatten().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn osc(variant: Variant, d: f64, e: f64, c: f64) -> Oscillator {
        Oscillator::new(variant, d, e, c)
    }

    #[test]
    fn identity_at_delta_one() {
        let m = excitation_monodromy(&osc(Variant::Classical, 1.0, 0.0, 0.0));
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((m.m[r][c] - want).abs() < 1e-9);
            }
        }
        for mu in m.multipliers() {
            assert!((mu - Complex64::new(1.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn trajectory_follows_cosine() {
        let path = trajectory(&osc(Variant::Classical, 0.25, 0.0, 0.0), 1.0, 0.0, 4.0 * PI, 200, &RkOptions::default());
        assert_eq!(path.len(), 201);
        for &(t, x) in &path {
            assert!((x - (t / 2.0).cos()).abs() < 1e-9, "t={t}");
        }
        assert!((path[200].0 - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn half_rotation_at_quarter() {
        let m = excitation_monodromy(&osc(Variant::Classical, 0.25, 0.0, 0.0));
        assert!((m.trace() + 2.0).abs() < 1e-9);
        assert!((m.m[0][0] + 1.0).abs() < 1e-9 && m.m[1][0].abs() < 1e-9);
    }

    #[test]
    fn damped_multiplier_magnitude() {
        let m = excitation_monodromy(&osc(Variant::Damped, 1.0, 0.0, 0.1));
        let want = (-0.1 * PI).exp();
        assert!((want - 0.7304).abs() < 1e-4);
        for mu in m.multipliers() {
            assert!((mu.norm() - want).abs() < 1e-6);
        }
        assert_eq!(classify(&m, Variant::Damped), Stability::Stable);
    }

    #[test]
    fn classify_examples() {
        let with_trace = |t: f64| MonodromyMatrix {
            m: [[t / 2.0, 1.0], [(t * t / 4.0 - 1.0), t / 2.0]],
        };
        assert!((with_trace(2.5).det() - 1.0).abs() < 1e-12);
        assert_eq!(classify(&with_trace(2.5), Variant::Classical), Stability::Unstable);
        assert_eq!(classify(&with_trace(0.0), Variant::Classical), Stability::Stable);
        let damped = MonodromyMatrix {
            m: [[0.73, 0.0], [0.0, 0.73]],
        };
        assert_eq!(classify(&damped, Variant::Damped), Stability::Stable);
    }

    #[test]
    fn determinant_follows_damping() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..20 {
            let d = rng.gen_range(-0.5..2.0);
            let e = rng.gen_range(0.0..3.0);
            let c = rng.gen_range(0.0..0.3);
            let m = excitation_monodromy(&osc(Variant::Damped, d, e, c));
            assert!((m.det() - (-2.0 * PI * c).exp()).abs() < 1e-6);
            let m = excitation_monodromy(&osc(Variant::Classical, d, e, 0.0));
            assert!((m.det() - 1.0).abs() < 1e-6);
            let m = excitation_monodromy(&osc(Variant::Impulsive, d, e - 1.5, 0.0));
            assert!((m.det() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn step_halving_is_converged() {
        for (v, d, e) in [
            (Variant::Classical, 0.3, 1.0),
            (Variant::Classical, 1.2, 2.5),
            (Variant::Impulsive, 0.48, 2.0),
            (Variant::Damped, 0.9, 1.5),
        ] {
            let o = osc(v, d, e, 0.1);
            let a = monodromy_with(&o, 2.0 * PI, &RkOptions::default()).trace();
            let fine = RkOptions {
                steps_per_2pi: 2 * STEPS_PER_PERIOD,
                ..RkOptions::default()
            };
            let b = monodromy_with(&o, 2.0 * PI, &fine).trace();
            assert!((a - b).abs() < 1e-8, "{v:?}: {a} vs {b}");
        }
    }

    #[test]
    fn impulsive_trace_matches_integration() {
        for i in 0..20 {
            for j in 0..20 {
                let d = -0.5 + 2.5 * i as f64 / 19.0;
                let e = -4.0 + 8.0 * j as f64 / 19.0;
                let rk = excitation_monodromy(&osc(Variant::Impulsive, d, e, 0.0)).trace();
                let cf = impulsive_trace(d, e);
                assert!((rk - cf).abs() < 1e-6 * (1.0 + cf.abs()), "({d},{e}): {rk} vs {cf}");
            }
        }
    }

    #[test]
    fn impulsive_trace_examples() {
        for e in [-3.0, 0.0, 1.0, 4.0] {
            assert!((impulsive_trace(0.25, e) + 2.0).abs() < 1e-12);
        }
        assert!((impulsive_trace(0.0, 1.0) - (2.0 - 2.0 * PI)).abs() < 1e-12);
        let near = |d: f64| impulsive_trace(d, 1.0);
        assert!((near(1e-9) - near(0.0)).abs() < 1e-6);
        assert!((near(-1e-9) - near(0.0)).abs() < 1e-6);
    }

    #[test]
    fn flipped_jump_changes_the_answer() {
        let o = osc(Variant::Impulsive, 0.48, 2.0, 0.0);
        let flipped = RkOptions {
            flip_jump_sign: true,
            ..RkOptions::default()
        };
        let a = monodromy_with(&o, 2.0 * PI, &flipped).trace();
        assert!((a - impulsive_trace(0.48, 2.0)).abs() > 1.0);
        assert!((a - impulsive_trace(0.48, -2.0)).abs() < 1e-6);
    }

    #[test]
    fn single_cell_chart() {
        let spec = ChartSpec {
            variant: Variant::Classical,
            delta_range: (4.5, 5.5),
            eps_range: (-0.5, 0.5),
            nx: 1,
            ny: 1,
            damping: 0.0,
        };
        let chart = grid_scan(&spec, 1);
        assert_eq!(chart.cells, vec![Stability::Stable]);
    }

    #[test]
    fn chart_is_independent_of_workers() {
        let spec = ChartSpec {
            variant: Variant::Classical,
            delta_range: (-0.5, 2.1),
            eps_range: (0.0, 4.5),
            nx: 26,
            ny: 15,
            damping: 0.0,
        };
        let a = grid_scan(&spec, 1);
        let b = grid_scan(&spec, 4);
        assert_eq!(a, b);
        assert!(a.unstable_count() > 0 && a.unstable_count() < a.cells.len());
        // The first tongue sits at δ = 1/4 near ε = 0.
        let (i, j) = spec.cell_of(0.25, 0.2).unwrap();
        assert_eq!(a.at(i, j), Stability::Unstable);
        assert!(spec.delta_at(0) > -0.5 && spec.eps_at(spec.ny - 1) < 4.5);
    }
}
