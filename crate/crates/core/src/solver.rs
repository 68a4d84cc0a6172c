//! The algebraic system (λ(1) constraint plus Galerkin projections), damped
//! Newton, and natural-parameter continuation in ε.

use crate::error::{Error, Result};
use crate::floquet::{floquet_check, Oscillator};
use crate::galerkin::{project, residual_signal, WeightSet};
use crate::ham::{run_expansion_in, HamScalar, HamSolution};
use crate::problem::{Branch, FieldMode, ProblemSpec, UnknownVector, Variant};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Evaluate Jacobian columns on the rayon pool.
    pub parallel: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iters: 50,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Damped Newton on `f(u) = 0`. Steps use the SVD pseudo-inverse of the
/// forward-difference Jacobian, so over-determined (stacked complex) and
/// rank-deficient systems are handled as least squares.
pub fn newton<F>(f: F, u0: &[f64], opts: &NewtonOptions) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if u0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidProblem("non-finite starting point".into()));
    }
    let mut u = u0.to_vec();
    let mut r = f(&u)?;
    let mut rn = norm(&r);
    for iter in 0..=opts.max_iters {
        if rn < opts.tol {
            return Ok(NewtonOutcome {
                u,
                iterations: iter,
                residual_norm: rn,
            });
        }
        if iter == opts.max_iters {
            break;
        }
        let column = |i: usize| -> Result<Vec<f64>> {
            let hi = fd_step(u[i]);
            let (mut up, mut um) = (u.clone(), u.clone());
            up[i] += hi;
            um[i] -= hi;
            let (rp, rm) = (f(&up)?, f(&um)?);
            Ok(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * hi)).collect())
        };
        let cols: Vec<Vec<f64>> = if opts.parallel {
            (0..u.len()).into_par_iter().map(column).collect::<Result<_>>()?
        } else {
            (0..u.len()).map(column).collect::<Result<_>>()?
        };
        let jac = DMatrix::from_fn(r.len(), u.len(), |i, j| cols[j][i]);
        if jac.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        // Two-sided equilibration: high-harmonic equations and weakly coupled
        // unknowns can be orders of magnitude weaker than the rest and must not
        // fall under the SVD cutoff.
        let inv_amax = |m: f64| if m > 0.0 { 1.0 / m } else { 1.0 };
        let rs: Vec<f64> = (0..r.len()).map(|i| inv_amax(jac.row(i).amax())).collect();
        let jac = DMatrix::from_fn(r.len(), u.len(), |i, j| jac[(i, j)] * rs[i]);
        let cs: Vec<f64> = (0..u.len()).map(|j| inv_amax(jac.column(j).amax())).collect();
        let jac = DMatrix::from_fn(r.len(), u.len(), |i, j| jac[(i, j)] * cs[j]);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            return Err(Error::SingularJacobian);
        }
        let rhs = DVector::from_iterator(r.len(), r.iter().zip(&rs).map(|(x, s)| -x * s));
        let step: Vec<f64> = svd
            .solve(&rhs, smax * 1e-12)
            .map_err(|_| Error::SingularJacobian)?
            .iter()
            .zip(&cs)
            .map(|(y, c)| y * c)
            .collect();

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-4 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            if let Ok(rt) = f(&trial) {
                let tn = norm(&rt);
                if tn.is_finite() && tn <= (1.0 - 1e-4 * alpha) * rn {
                    accepted = Some((trial, rt, tn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((ut, rt, tn)) => {
                u = ut;
                r = rt;
                rn = tn;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iter + 1,
                    residual_norm: rn,
                })
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        residual_norm: rn,
    })
}

/// The `N+2` equations in the `N+2` unknowns `δ, h⁽¹⁾..h⁽ᴺ⁺¹⁾` at fixed ε.
#[derive(Clone, Debug)]
pub struct AlgebraicSystem {
    pub spec: ProblemSpec,
    pub weights: WeightSet,
    pub delta_window: (f64, f64),
    /// Projections are divided by `∫₀ᵀ w²` so every equation is O(1).
    weight_norms: Vec<f64>,
}

impl AlgebraicSystem {
    pub fn new(spec: ProblemSpec, delta_window: (f64, f64)) -> Result<Self> {
        spec.validate()?;
        let weights = WeightSet::for_spec(&spec);
        let weight_norms = weights
            .weights
            .iter()
            .map(|w| Ok(w.mul(w)?.definite_integral(0.0, weights.period)?))
            .collect::<Result<_>>()?;
        Ok(AlgebraicSystem {
            spec,
            weights,
            delta_window,
            weight_norms,
        })
    }

    pub fn dimension(&self) -> usize {
        self.spec.unknown_count()
    }

    fn spec_at(&self, u: &UnknownVector) -> ProblemSpec {
        ProblemSpec {
            delta: u.delta,
            ..self.spec.clone()
        }
    }

    pub fn expansion<S: HamScalar>(&self, u: &UnknownVector) -> Result<HamSolution<S>> {
        run_expansion_in::<S>(&self.spec_at(u), u)
    }

    fn residual_in<S: HamScalar>(&self, u: &UnknownVector) -> Result<Vec<S>> {
        let spec = self.spec_at(u);
        let sol = run_expansion_in::<S>(&spec, u)?;
        let r = residual_signal(&spec, &sol.x_n)?;
        let proj = project(&r, &self.weights)?;
        Ok(std::iter::once(sol.lambda_residual)
            .chain(proj.into_iter().zip(&self.weight_norms).map(|(p, n)| p.scale(1.0 / n)))
            .collect())
    }

    /// Real residual vector; in complex mode real and imaginary parts are
    /// stacked.
    pub fn residual(&self, u: &UnknownVector) -> Result<Vec<f64>> {
        match self.spec.field_mode {
            FieldMode::Real => self.residual_in::<f64>(u),
            FieldMode::Complex => {
                let r = self.residual_in::<Complex64>(u)?;
                Ok(r.iter().map(|z| z.re).chain(r.iter().map(|z| z.im)).collect())
            }
        }
    }

    fn zeta0(&self, u: &UnknownVector) -> Option<f64> {
        match self.spec.field_mode {
            FieldMode::Real => self.expansion::<f64>(u).ok()?.zeta_orders.first().copied(),
            FieldMode::Complex => self.expansion::<Complex64>(u).ok()?.zeta_orders.first().map(|z| z.re),
        }
    }

    pub fn oscillator(&self, delta: f64) -> Oscillator {
        Oscillator::new(self.spec.variant, delta, self.spec.epsilon, self.spec.damping)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub delta: f64,
    pub h: Vec<f64>,
    /// Real part of `ζ⁽⁰⁾` (damped only).
    pub zeta0: Option<f64>,
    pub newton_iters: usize,
    pub residual_norm: f64,
    pub floquet_check: f64,
}

impl CurvePoint {
    pub fn unknowns(&self) -> UnknownVector {
        UnknownVector::new(self.delta, self.h.clone())
    }
}

pub fn newton_solve(sys: &AlgebraicSystem, u0: &UnknownVector, opts: &NewtonOptions) -> Result<CurvePoint> {
    if u0.len() != sys.dimension() {
        return Err(Error::InvalidProblem(format!(
            "expected {} unknowns, got {}",
            sys.dimension(),
            u0.len()
        )));
    }
    let out = newton(|v| sys.residual(&UnknownVector::from_slice(v)), &u0.to_vec(), opts)?;
    let u = UnknownVector::from_slice(&out.u);
    let (lo, hi) = sys.delta_window;
    if !(lo..=hi).contains(&u.delta) {
        return Err(Error::OutsideWindow { delta: u.delta, lo, hi });
    }
    Ok(CurvePoint {
        epsilon: sys.spec.epsilon,
        delta: u.delta,
        zeta0: sys.zeta0(&u),
        floquet_check: floquet_check(&sys.oscillator(u.delta)),
        h: u.h,
        newton_iters: out.iterations,
        residual_norm: out.residual_norm,
    })
}

/// Emanation `δ`, `h⁽¹⁾ = −λ(1)²` (the time rescale factor), higher `h` zero.
pub fn seed_guess(spec: &ProblemSpec, branch: Branch) -> UnknownVector {
    let mut h = vec![0.0; spec.order + 1];
    h[0] = -f64::from(spec.lambda1.pow(2));
    UnknownVector::new(branch.emanation(), h)
}

pub fn initial_window(branch: Branch) -> (f64, f64) {
    let w = branch.window_half_width();
    (branch.emanation() - w, branch.emanation() + w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceOptions {
    pub eps_range: (f64, f64),
    pub step: f64,
    pub newton: NewtonOptions,
    /// Starting unknowns at the anchor; the branch seed when `None`.
    pub seed: Option<UnknownVector>,
    /// ε at which the branch is first located; continuation then runs to both
    /// ends of `eps_range`. Defaults to [`default_anchor`].
    pub anchor: Option<f64>,
}

impl TraceOptions {
    pub fn new(eps_range: (f64, f64), step: f64) -> Self {
        TraceOptions {
            eps_range,
            step,
            newton: NewtonOptions::default(),
            seed: None,
            anchor: None,
        }
    }
}

/// The δ = 0 branch is only reachable from the emanation seed once ε is
/// moderate: its convergence-control values grow like ε⁻² towards the axis.
pub fn default_anchor(branch: Branch, eps_range: (f64, f64)) -> f64 {
    let (lo, hi) = (eps_range.0.min(eps_range.1), eps_range.0.max(eps_range.1));
    match branch {
        Branch::P2Zero => 0.5f64.clamp(lo, hi),
        _ => eps_range.0,
    }
}

/// Damped tongues are lifted off the axis; they are located at moderate ε.
fn anchor_for(template: &ProblemSpec, branch: Branch, eps_range: (f64, f64)) -> f64 {
    let (lo, hi) = (eps_range.0.min(eps_range.1), eps_range.0.max(eps_range.1));
    match template.variant {
        Variant::Damped => (if branch.lambda1() == 1 { 1.0f64 } else { 0.4 }).clamp(lo, hi),
        _ => default_anchor(branch, eps_range),
    }
}

const SEED_TRIES: usize = 256;

/// Raise the order one step at a time from `N = 1`, seeding each system with
/// the previous `h` padded by a zero.
fn order_ladder(sys: &AlgebraicSystem, seed: &UnknownVector, opts: &NewtonOptions) -> Result<CurvePoint> {
    let mut u = UnknownVector::new(seed.delta, seed.h[..2].to_vec());
    let mut last = None;
    for order in 1..=sys.spec.order {
        let spec = ProblemSpec {
            order,
            ..sys.spec.clone()
        };
        let p = newton_solve(&AlgebraicSystem::new(spec, sys.delta_window)?, &u, opts)?;
        u = p.unknowns();
        u.h.push(0.0);
        last = Some(p);
    }
    last.ok_or_else(|| Error::InvalidProblem("order must be at least 1".into()))
}

fn multi_start<'a>(sys: &'a AlgebraicSystem, opts: &NewtonOptions) -> impl Iterator<Item = CurvePoint> + 'a {
    let mut rng = StdRng::seed_from_u64(0x7075_6e67);
    let (lo, hi) = sys.delta_window;
    let scale = f64::from(sys.spec.lambda1.pow(2));
    let opts = *opts;
    (0..SEED_TRIES).filter_map(move |_| {
        let delta = rng.gen_range(lo..=hi);
        let h: Vec<f64> = (0..=sys.spec.order)
            .map(|i| scale * rng.gen_range(-4.0..4.0) / (i + 1) as f64)
            .collect();
        newton_solve(sys, &UnknownVector::new(delta, h), &opts).ok()
    })
}

fn h_norm(p: &CurvePoint) -> f64 {
    norm(&p.h)
}

/// Solve from `seed`; failing that, climb the order ladder; failing that, a
/// deterministic multi-start over `δ` in the window and `h` scaled by `λ(1)²`
/// returns the first root inside it.
///
/// Damped systems have many roots inside any useful window. There every
/// candidate is collected and the one with the smallest convergence-control
/// vector wins.
pub fn locate(sys: &AlgebraicSystem, seed: &UnknownVector, opts: &NewtonOptions) -> Result<CurvePoint> {
    let first = newton_solve(sys, seed, opts);
    if sys.spec.variant == Variant::Damped {
        return first
            .iter()
            .cloned()
            .chain(multi_start(sys, opts))
            .min_by(|a, b| h_norm(a).total_cmp(&h_norm(b)))
            .ok_or_else(|| first.unwrap_err());
    }
    if first.is_ok() {
        return first;
    }
    if let Ok(p) = order_ladder(sys, seed, opts) {
        return Ok(p);
    }
    multi_start(sys, opts).next().ok_or_else(|| first.unwrap_err())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionCurve {
    pub branch_id: String,
    pub points: Vec<CurvePoint>,
}

/// Secant predictor through the last two points; warm start from the last
/// point when only one is known.
fn predict(points: &[CurvePoint], eps: f64) -> UnknownVector {
    let last = &points[points.len() - 1];
    let Some(prev) = points.len().checked_sub(2).map(|i| &points[i]) else {
        return last.unknowns();
    };
    let s = (eps - last.epsilon) / (last.epsilon - prev.epsilon);
    let (a, b) = (last.unknowns().to_vec(), prev.unknowns().to_vec());
    UnknownVector::from_slice(&a.iter().zip(&b).map(|(x, y)| x + s * (x - y)).collect::<Vec<_>>())
}

struct Tracer<'a> {
    template: &'a ProblemSpec,
    half_width: f64,
    step: f64,
    newton: NewtonOptions,
}

impl Tracer<'_> {
    fn system(&self, eps: f64, center: f64) -> Result<AlgebraicSystem> {
        let spec = self.template.clone().with_epsilon(eps);
        AlgebraicSystem::new(spec, (center - self.half_width, center + self.half_width))
    }

    /// Continue from `start` to `target`, returning the new points in
    /// marching order. A failed step is halved down to `step/32`; below that
    /// the branch is lost, which ends the march early when `truncate` is set.
    fn march(&self, start: CurvePoint, target: f64, truncate: bool) -> Result<Vec<CurvePoint>> {
        let dir = if target >= start.epsilon { 1.0 } else { -1.0 };
        let floor = self.step / 32.0;
        let mut points = vec![start];
        let mut step = self.step;
        while let Some(last) = points.last().filter(|p| dir * (target - p.epsilon) > 0.0) {
            let eps = if dir * (target - last.epsilon) <= step { target } else { last.epsilon + dir * step };
            let attempt = self
                .system(eps, last.delta)
                .and_then(|sys| newton_solve(&sys, &predict(&points, eps), &self.newton));
            match attempt {
                Ok(p) => {
                    points.push(p);
                    step = (step * 2.0).min(self.step);
                }
                Err(_) if step / 2.0 >= floor => step /= 2.0,
                Err(_) if truncate => break,
                Err(_) => {
                    return Err(Error::BranchLost {
                        last_good_epsilon: last.epsilon,
                        step_floor: floor,
                    })
                }
            }
        }
        points.remove(0);
        Ok(points)
    }
}

/// Natural-parameter continuation in ε with secant-predicted warm starts. The
/// branch is located at the anchor and continued to both ends of
/// `eps_range`; points are returned in increasing ε.
pub fn trace_curve(template: &ProblemSpec, branch: Branch, opts: &TraceOptions) -> Result<TransitionCurve> {
    let (e0, e1) = opts.eps_range;
    let (lo, hi) = (e0.min(e1), e0.max(e1));
    let tracer = Tracer {
        template,
        half_width: branch.window_half_width(),
        step: opts.step,
        newton: opts.newton,
    };
    let anchor = opts.anchor.unwrap_or_else(|| anchor_for(template, branch, opts.eps_range));
    let seed = opts.seed.clone().unwrap_or_else(|| seed_guess(template, branch));
    let first = locate(&tracer.system(anchor, branch.emanation())?, &seed, &opts.newton)?;
    // Towards the axis a damped branch ends at the tongue tip.
    let mut below = tracer.march(first.clone(), lo, template.variant == Variant::Damped)?;
    below.reverse();
    let above = tracer.march(first.clone(), hi, false)?;
    let points = below.into_iter().chain(std::iter::once(first)).chain(above).collect();
    Ok(TransitionCurve {
        branch_id: branch.id().to_string(),
        points,
    })
}

/// Below this ε a branch is located directly at the requested point; above
/// it the point is reached by continuation from here.
pub const AXIS_START: f64 = 0.05;

/// Solve one point of `branch` at `eps`. With an explicit `window` the
/// system is located there directly. Otherwise undamped branches far from
/// the axis are reached by continuation from [`AXIS_START`].
pub fn solve_point(
    template: &ProblemSpec,
    branch: Branch,
    eps: f64,
    window: Option<(f64, f64)>,
    opts: &TraceOptions,
) -> Result<CurvePoint> {
    let seed = opts.seed.clone().unwrap_or_else(|| seed_guess(template, branch));
    if let Some(w) = window {
        let sys = AlgebraicSystem::new(template.clone().with_epsilon(eps), w)?;
        let seed = UnknownVector::new(0.5 * (w.0 + w.1), seed.h);
        return locate(&sys, &seed, &opts.newton);
    }
    if eps <= AXIS_START || template.variant == Variant::Damped {
        let sys = AlgebraicSystem::new(template.clone().with_epsilon(eps), initial_window(branch))?;
        return locate(&sys, &seed, &opts.newton);
    }
    let trace = TraceOptions {
        eps_range: (AXIS_START, eps),
        anchor: None,
        ..opts.clone()
    };
    let curve = trace_curve(template, branch, &trace)?;
    curve
        .points
        .into_iter()
        .last()
        .ok_or_else(|| Error::InvalidProblem("empty trace".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Start;

    #[test]
    fn scalar_newton() {
        let out = newton(|u| Ok(vec![u[0] * u[0] - 4.0]), &[3.0], &NewtonOptions {
            tol: 1e-12,
            ..Default::default()
        })
        .unwrap();
        assert!((out.u[0] - 2.0).abs() < 1e-12);
        assert!(out.residual_norm < 1e-12);
        assert!(out.iterations <= 6);
    }

    #[test]
    fn newton_reports_failure() {
        let err = newton(|u| Ok(vec![u[0] * u[0] + 1.0]), &[0.5], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. } | Error::SingularJacobian));
        let err = newton(|_| Ok(vec![1.0]), &[0.5], &NewtonOptions::default()).unwrap_err();
        assert_eq!(err, Error::SingularJacobian);
    }

    #[test]
    fn residual_has_unknown_dimension() {
        for spec in [
            ProblemSpec::classical(2, Start::Cos, 3),
            ProblemSpec::damped(1, 0.1, 4).with_epsilon(1.0),
            ProblemSpec::impulsive(1, Start::Cos, 3),
        ] {
            let n = spec.unknown_count();
            let sys = AlgebraicSystem::new(spec, (-1.0, 2.0)).unwrap();
            let u = seed_guess(&sys.spec, Branch::P2Left);
            assert_eq!(sys.residual(&u).unwrap().len(), n);
        }
    }

    #[test]
    fn residual_is_deterministic() {
        let spec = ProblemSpec::classical(2, Start::Cos, 3).with_epsilon(1.3);
        let sys = AlgebraicSystem::new(spec, (0.0, 0.5)).unwrap();
        let u = UnknownVector::new(0.2, vec![-0.9, 0.1, 0.05, -0.02]);
        let a = sys.residual(&u).unwrap();
        let b = sys.residual(&u).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn impulsive_anchor_2pi() {
        let spec = Branch::P2Left.spec(Variant::Impulsive, 3, 0.0).with_epsilon(2.0);
        let sys = AlgebraicSystem::new(spec, (0.0, 1.0)).unwrap();
        let p = newton_solve(&sys, &UnknownVector::new(0.5, vec![-1.0, 0.0, 0.0, 0.0]), &NewtonOptions::default())
            .unwrap();
        assert!((p.delta - 0.4802).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn axis_point_is_exact_cosine() {
        let spec = Branch::P4Left.spec(Variant::Classical, 3, 0.0);
        let p = solve_point(&spec, Branch::P4Left, 0.0, None, &TraceOptions::new((0.0, 0.0), 0.05)).unwrap();
        assert!((p.delta - 0.25).abs() < 1e-12, "{p:?}");
        let sys = AlgebraicSystem::new(spec.with_epsilon(0.0), initial_window(Branch::P4Left)).unwrap();
        let x = sys.expansion::<f64>(&p.unknowns()).unwrap().x_n;
        for t in [0.0, 1.0, 2.5, 7.0, 12.0] {
            assert!((x.eval(t) - (t / 2.0).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_window_is_rejected() {
        let spec = Branch::P2Left.spec(Variant::Impulsive, 3, 0.0).with_epsilon(2.0);
        let sys = AlgebraicSystem::new(spec, (0.6, 1.0)).unwrap();
        let err = newton_solve(&sys, &UnknownVector::new(0.5, vec![-1.0, 0.0, 0.0, 0.0]), &NewtonOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::OutsideWindow { .. }), "{err:?}");
    }

    #[test]
    fn seed_values() {
        let spec = ProblemSpec::classical(2, Start::Cos, 3);
        let u = seed_guess(&spec, Branch::P4Left);
        assert_eq!(u, UnknownVector::new(0.25, vec![-4.0, 0.0, 0.0, 0.0]));
        assert_eq!(seed_guess(&spec, Branch::P2Right).delta, 1.0);
    }
}
