use super::*;
use crate::problem::FieldMode;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn u(delta: f64, h: &[f64]) -> UnknownVector {
    UnknownVector::new(delta, h.to_vec())
}

fn max_abs_diff(a: &Signal, b: impl Fn(f64) -> f64, t0: f64, t1: f64) -> f64 {
    (0..=200)
        .map(|i| {
            let t = t0 + (t1 - t0) * i as f64 / 200.0;
            (a.eval(t) - b(t)).abs()
        })
        .fold(0.0, f64::max)
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (diff {:e})", (a - b).abs());
}

#[test]
fn zeroth_solutions() {
    let z = zeroth_solution::<f64>(&ProblemSpec::classical(2, Start::Cos, 2));
    assert_eq!(z.fixed, Signal::cos(harmonic(1)));
    assert!(z.zeta_direction.is_none());
    let z = zeroth_solution::<f64>(&ProblemSpec::impulsive(2, Start::Sin, 2));
    assert_eq!(z.fixed, Signal::sin(harmonic(1)));
    let z = zeroth_solution::<f64>(&ProblemSpec::damped(1, 0.1, 2));
    assert_eq!(z.fixed, Signal::cos(harmonic(1)));
    assert_eq!(z.zeta_direction, Some(Signal::sin(harmonic(1))));
    assert_eq!(
        z.with_zeta(0.5),
        Signal::cos(harmonic(1)).add(&Signal::sin(harmonic(1)).scale(0.5))
    );
}

#[test]
fn first_order_forcing_classical() {
    let (d, e, h1) = (0.3, 0.7, -0.9);
    let spec = ProblemSpec::classical(2, Start::Cos, 1).with_epsilon(e);
    let st = HamState::<f64>::new(&spec, &u(d, &[h1, 0.0])).unwrap();
    let f = st.deformation_rhs(1).unwrap();
    let expect = Signal::cos(harmonic(1))
        .scale((-1.0 + d + e / 2.0) * h1)
        .add(&Signal::cos(harmonic(3)).scale(e * h1 / 2.0));
    assert!(f.base.sub(&expect).max_coeff() < 1e-14);
    assert_eq!(f.dir_lambda, Signal::cos(harmonic(1)).scale(-2.0));
}

#[test]
fn first_order_forcing_impulsive() {
    let (d, e, h1) = (0.8, 1.3, -0.6);
    let spec = ProblemSpec::impulsive(1, Start::Cos, 1).with_epsilon(e);
    let st = HamState::<f64>::new(&spec, &u(d, &[h1, 0.0])).unwrap();
    let f = st.deformation_rhs(1).unwrap();
    let expect = Signal::cos(harmonic(1))
        .scale(-(1.0 - d) * h1)
        .add(&Signal::dirac(e * h1 * -1.0, PI));
    assert!(f.base.sub(&expect).max_coeff() < 1e-14, "{}", f.base);
    assert_eq!(f.dir_lambda, Signal::cos(harmonic(1)).scale(-2.0));
}

#[test]
fn first_order_forcing_without_excitation() {
    let (d, h1) = (0.4, 1.7);
    for spec in [
        ProblemSpec::classical(1, Start::Sin, 1),
        ProblemSpec::classical(2, Start::Cos, 1),
        ProblemSpec::impulsive(2, Start::Sin, 1),
    ] {
        let st = HamState::<f64>::new(&spec, &u(d, &[h1, 0.0])).unwrap();
        let f = st.deformation_rhs(1).unwrap();
        let x0 = zeroth_solution::<f64>(&spec).fixed;
        assert!(f.base.sub(&x0.scale((d - 1.0) * h1)).max_coeff() < 1e-14);
        assert!(f.dir_lambda.sub(&x0.scale(-2.0)).max_coeff() < 1e-15);
    }
}

#[test]
fn secular_removal_examples() {
    let (d, e, h1) = (0.1, 0.9, -1.2);
    let spec = ProblemSpec::classical(2, Start::Cos, 1).with_epsilon(e);
    let sol = run_expansion(&spec, &u(d, &[h1, 0.3])).unwrap();
    close(sol.lambda_orders[0], h1 / 2.0 * (-1.0 + d + e / 2.0), 1e-14);

    let spec = ProblemSpec::impulsive(1, Start::Cos, 1).with_epsilon(e);
    let sol = run_expansion(&spec, &u(d, &[h1, 0.3])).unwrap();
    close(sol.lambda_orders[0], h1 / 2.0 * (-1.0 + d + e / PI), 1e-14);

    let spec = ProblemSpec::impulsive(2, Start::Sin, 1).with_epsilon(e);
    let sol = run_expansion(&spec, &u(d, &[h1, 0.3])).unwrap();
    close(sol.lambda_orders[0], h1 / 2.0 * (-1.0 + d + e / PI), 1e-14);
}

#[test]
fn second_order_lambda_hand_value() {
    let spec = ProblemSpec::classical(2, Start::Cos, 1);
    let sol = run_expansion(&spec, &u(0.25, &[-1.0, 0.0])).unwrap();
    close(sol.lambda_orders[0], 0.375, 1e-14);
    close(sol.lambda_orders[1], 0.421875, 1e-14);
}

#[test]
fn classical_closed_forms() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let d: f64 = rng.gen_range(-0.5..1.5);
        let e: f64 = rng.gen_range(0.0..3.0);
        let h1: f64 = rng.gen_range(-1.5..0.5);
        let h2: f64 = rng.gen_range(-1.0..1.0);
        let spec = ProblemSpec::classical(2, Start::Cos, 2).with_epsilon(e);
        let sol = run_expansion(&spec, &u(d, &[h1, h2, 0.1])).unwrap();
        let l1 = h1 / 2.0 * (-1.0 + d + e / 2.0);
        let l2 = (h1 + h2 / 2.0) * (-1.0 + d + e / 2.0)
            + h1 * h1 / 4.0 * (-1.0 - 2.0 * d - e + 3.0 * d * d + 3.0 * e * d + 5.0 * e * e / 8.0);
        close(sol.lambda_orders[0], l1, 1e-10);
        close(sol.lambda_orders[1], l2, 1e-10);
        let x1 = |t: f64| e * h1 / 16.0 * (t.cos() - (3.0 * t).cos());
        assert!(max_abs_diff(&sol.x_orders[1], x1, 0.0, 4.0 * PI) < 1e-10);
        let x2 = |t: f64| {
            e / 8.0
                * ((h1 + h2 / 2.0 + 29.0 * e * h1 * h1 / 48.0 + d * h1 * h1) * t.cos()
                    - (h1 + h2 / 2.0 + 5.0 * e * h1 * h1 / 8.0 + d * h1 * h1) * (3.0 * t).cos()
                    + e * h1 * h1 / 48.0 * (5.0 * t).cos())
        };
        assert!(max_abs_diff(&sol.x_orders[2], x2, 0.0, 4.0 * PI) < 1e-10);
    }
}

#[test]
fn impulsive_first_order_solutions() {
    let (d, e, h1) = (0.6, 1.1, -0.8);
    let spec = ProblemSpec::impulsive(1, Start::Cos, 1).with_epsilon(e);
    let sol = run_expansion(&spec, &u(d, &[h1, 0.0])).unwrap();
    let heaviside = |t: f64, a: f64| if t >= a { 1.0 } else { 0.0 };
    let x1 = |t: f64| e * h1 / 2.0 * (2.0 * heaviside(t, PI) - t / PI) * t.sin();
    assert!(max_abs_diff(&sol.x_orders[1], x1, 0.0, 2.0 * PI) < 1e-12);

    let spec = ProblemSpec::impulsive(2, Start::Sin, 1).with_epsilon(e);
    let sol = run_expansion(&spec, &u(d, &[h1, 0.0])).unwrap();
    let x1 = |t: f64| {
        e * h1 / 2.0 * (-heaviside(t, 1.5 * PI) - heaviside(t, 0.5 * PI) + t / PI) * t.cos()
            - e * h1 / (2.0 * PI) * t.sin()
    };
    assert!(max_abs_diff(&sol.x_orders[1], x1, 0.0, 2.0 * PI) < 1e-12);
}

/// Truncated power series in `p` up to `p³`.
#[derive(Clone, Copy, Debug)]
struct Ser([f64; 4]);

impl Ser {
    fn c(v: f64) -> Self {
        Ser([v, 0.0, 0.0, 0.0])
    }
    fn add(self, o: Ser) -> Ser {
        Ser(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
    fn sub(self, o: Ser) -> Ser {
        Ser(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
    fn mul(self, o: Ser) -> Ser {
        Ser(std::array::from_fn(|n| (0..=n).map(|i| self.0[i] * o.0[n - i]).sum()))
    }
    fn tail(self) -> Ser {
        Ser([0.0, self.0[1], self.0[2], self.0[3]])
    }
    /// `Σ_k coef[k]·r^k` with `r` the tail of `self`.
    fn compose(self, coef: [f64; 4]) -> Ser {
        let r = self.tail();
        let mut out = Ser::c(0.0);
        let mut pow = Ser::c(1.0);
        for c in coef {
            out = out.add(pow.mul(Ser::c(c)));
            pow = pow.mul(r);
        }
        out
    }
    fn recip(self) -> Ser {
        let a = self.0[0];
        self.compose([1.0 / a, -1.0 / (a * a), 1.0 / a.powi(3), -1.0 / a.powi(4)])
    }
    fn sqrt(self) -> Ser {
        let s = self.0[0].sqrt();
        self.compose([s, 0.5 / s, -0.125 / s.powi(3), 0.0625 / s.powi(5)])
    }
    fn cos(self) -> Ser {
        let (sn, cs) = self.0[0].sin_cos();
        self.compose([cs, -sn, -cs / 2.0, sn / 6.0])
    }
    fn sin(self) -> Ser {
        let (sn, cs) = self.0[0].sin_cos();
        self.compose([sn, cs, -sn / 2.0, -cs / 6.0])
    }
}

/// Exact solution of the frozen impulsive 2π homotopy at fixed `p` with
/// `X(0) = 1`, `X'(0) = 0`, as a series in `p`: `(X(τ), X'(τ))`.
fn exact_homotopy(tau: f64, lam: Ser, dd: f64, e: f64, h: &[f64; 3]) -> (Ser, Ser) {
    let p = Ser([0.0, 1.0, 0.0, 0.0]);
    let hp = Ser([0.0, h[0], h[1] / 2.0, h[2] / 6.0]);
    let one_minus_p = Ser::c(1.0).sub(p);
    let a = one_minus_p.sub(hp);
    let lam2 = lam.mul(lam);
    let w = lam2.mul(one_minus_p.sub(hp.mul(Ser::c(dd)))).mul(a.recip()).sqrt();
    let at = |s: f64| (w.mul(Ser::c(s)).cos(), w.mul(Ser::c(s)).sin());
    if tau < PI {
        let (c, s) = at(tau);
        return (c, Ser::c(0.0).sub(w.mul(s)));
    }
    let (cp, sp) = at(PI);
    let x_pi = cp;
    let v_pi = Ser::c(0.0)
        .sub(w.mul(sp))
        .add(hp.mul(lam2).mul(Ser::c(e)).mul(x_pi).mul(a.recip()));
    let (c, s) = at(tau - PI);
    let x = x_pi.mul(c).add(v_pi.mul(w.recip()).mul(s));
    let v = v_pi.mul(c).sub(x_pi.mul(w).mul(s));
    (x, v)
}

/// `x̂₃(t)` from the exact homotopy solution. Removing the resonant forcing
/// at every order is equivalent to `X'(2π; p) ≡ 0`, which fixes `λ(p)`.
fn oracle_x3(t: f64, dd: f64, e: f64, h: &[f64; 3]) -> f64 {
    let mut lam = Ser::c(1.0);
    let slope = {
        let g = |l: f64| exact_homotopy(2.0 * PI, Ser::c(l), dd, e, h).1 .0[0];
        (g(1.0 + 1e-6) - g(1.0 - 1e-6)) / 2e-6
    };
    for _ in 0..4 {
        let g = exact_homotopy(2.0 * PI, lam, dd, e, h).1;
        lam = lam.sub(g.mul(Ser::c(1.0 / slope)));
        lam.0[0] = 1.0;
    }
    exact_homotopy(t, lam, dd, e, h).0 .0.iter().sum()
}

/// Closed-form `x̂₃(t)`. The `h⁽¹⁾h⁽²⁾ sin t H(t−π)` coefficient has
/// denominator `2π`; see the oracle check below.
fn reference_x3(t: f64, dd: f64, e: f64, h1: f64, h2: f64, h3: f64) -> f64 {
    let hs = if t >= PI { 1.0 } else { 0.0 };
    let (c, s) = (t.cos(), t.sin());
    let k = 2.0 * PI * dd + e;
    let p2 = PI * PI;
    c - e * e * h1 / 2.0 * (3.0 * h1 + h2 + k * h1 * h1 / PI) * c * hs
        + e * (3.0 * h1
            + h2
            + h3 / 6.0
            + (6.0 * PI * dd + 3.0 * e) * h1 * h1 / (2.0 * PI)
            + k * h1 * h2 / (2.0 * PI)
            + ((1.0 - p2) * e * e + 4.0 * PI * dd * (PI * dd + e)) * h1.powi(3) / (4.0 * p2))
            * s
            * hs
        - e / (2.0 * PI)
            * (3.0 * h1
                + h2
                + h3 / 6.0
                + 3.0 * k * h1 * h1 / (2.0 * PI)
                + k * h1 * h2 / (2.0 * PI)
                + (12.0 * PI * dd * (PI * dd + e) + (3.0 - p2) * e * e) * h1.powi(3) / (12.0 * p2))
            * t
            * s
        + e * e * (k * h1.powi(3) / (2.0 * p2) + 3.0 * h1 * h1 / (2.0 * PI) + h1 * h2 / (2.0 * PI)) * t * c * hs
        + e.powi(3) * h1.powi(3) / (4.0 * PI) * t * s * hs
        - e * e * h1 / (8.0 * p2) * (3.0 * h1 + h2 + k * h1 * h1 / PI) * t * t * c
        - e.powi(3) * h1.powi(3) / (8.0 * p2) * t * t * s * hs
        + e.powi(3) * h1.powi(3) / (48.0 * PI.powi(3)) * t.powi(3) * s
}

#[test]
fn impulsive_third_order_against_exact_homotopy() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..5 {
        let dd: f64 = rng.gen_range(0.0..1.2);
        let e: f64 = rng.gen_range(0.0..1.5);
        let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let spec = ProblemSpec::impulsive(1, Start::Cos, 3).with_epsilon(e);
        let sol = run_expansion(&spec, &u(dd, &h)).unwrap();
        for i in 0..40 {
            let t = 2.0 * PI * (i as f64 + 0.5) / 40.0;
            let o = oracle_x3(t, dd, e, &[h[0], h[1], h[2]]);
            close(sol.x_n.eval(t), o, 1e-8);
            close(reference_x3(t, dd, e, h[0], h[1], h[2]), o, 1e-8);
        }
    }
}

#[test]
fn impulsive_third_order_closed_form() {
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dd: f64 = rng.gen_range(0.0..1.5);
        let e: f64 = rng.gen_range(0.0..2.0);
        let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = ProblemSpec::impulsive(1, Start::Cos, 3).with_epsilon(e);
        let sol = run_expansion(&spec, &u(dd, &h)).unwrap();
        for i in 0..100 {
            let t = 2.0 * PI * (i as f64 + 0.5) / 100.0;
            let diff = (sol.x_n.eval(t) - reference_x3(t, dd, e, h[0], h[1], h[2])).abs();
            worst = worst.max(diff);
        }
    }
    assert!(worst < 1e-8, "max deviation {worst:e}");
}

fn all_specs(order: usize) -> Vec<ProblemSpec> {
    let mut v = vec![];
    for l1 in [1, 2] {
        for st in [Start::Cos, Start::Sin] {
            v.push(ProblemSpec::classical(l1, st, order).with_epsilon(0.8));
            v.push(ProblemSpec::impulsive(l1, st, order).with_epsilon(0.8));
        }
    }
    v.push(ProblemSpec::damped(1, 0.1, order).with_epsilon(0.9));
    v
}

#[test]
fn order_consistency_and_secular_free() {
    let h = [-0.7, 0.2, -0.1, 0.05, 0.02];
    for spec in all_specs(4) {
        let sol = run_expansion(&spec, &u(0.4, &h)).unwrap();
        for n in 1..=spec.order {
            let x = &sol.x_orders[n];
            let lhs = x.differentiate().unwrap().differentiate().unwrap().add(x);
            let gap = lhs.sub(&sol.forcings[n - 1]);
            assert!(gap.max_coeff() < 1e-10, "{:?} n={n}: {gap}", spec.variant);
            let v0 = x.differentiate().unwrap().eval(0.0);
            assert!(x.eval(0.0).abs() < 1e-12);
            let want_v0 = sol.zeta_orders.get(n).copied().unwrap_or(0.0);
            close(v0, want_v0, 1e-12);
        }
        for (n, f) in sol.forcings.iter().enumerate() {
            let (c, s) = resonant_content(&spec, f).unwrap();
            match spec.start {
                Start::Cos => assert!(c.abs() < 1e-10, "n={} {c}", n + 1),
                Start::Sin => assert!(s.abs() < 1e-10, "n={} {s}", n + 1),
                Start::Zeta => assert!(c.abs() < 1e-10 && s.abs() < 1e-10),
            }
        }
    }
}

#[test]
fn no_excitation_means_no_corrections() {
    for mut spec in all_specs(3) {
        if spec.variant == Variant::Damped {
            continue;
        }
        spec.epsilon = 0.0;
        let (d, h) = (0.3, [-0.8, 0.4, 0.2, 0.1]);
        let sol = run_expansion(&spec, &u(d, &h)).unwrap();
        for x in &sol.x_orders[1..] {
            assert!(x.max_coeff() < 1e-14, "{x}");
        }
        // The exact relation is λ(p)² (1 − h(p)δ... ) so check λ⁽¹⁾ only.
        close(sol.lambda_orders[0], h[0] / 2.0 * (d - 1.0), 1e-14);
        let total: f64 = 1.0
            + sol
                .lambda_orders
                .iter()
                .enumerate()
                .map(|(i, l)| l / factorial(i + 1))
                .sum::<f64>();
        close(sol.lambda_residual, spec.lambda1 as f64 - total, 1e-14);
    }
}

fn damped_zeta0(e: f64, c: f64, h1: f64, sign: f64) -> f64 {
    (e + sign * (e * e - 4.0 * c * c * h1 * h1).sqrt()) / (2.0 * c * h1)
}

#[test]
fn damped_first_order_closed_forms() {
    let (d, e, c, h1) = (0.9, 1.2, 0.1, -0.7);
    for (root, sign) in [(ZetaRoot::Minus, -1.0), (ZetaRoot::Plus, 1.0)] {
        let mut spec = ProblemSpec::damped(1, c, 1).with_epsilon(e);
        spec.zeta0_root = root;
        let sol = run_expansion(&spec, &u(d, &[h1, 0.0])).unwrap();
        let z0 = damped_zeta0(e, c, h1, sign);
        close(sol.zeta_orders[0], z0, 1e-12);
        close(sol.lambda_orders[0], 0.5 * (-e + (-1.0 + d + c * z0) * h1), 1e-12);
        let z1 = sol.zeta_orders[1];
        let x1 = |t: f64| {
            -e * h1 / 3.0 * t.cos() - e * h1 / 6.0 * (2.0 * t).cos()
                + (e * z0 * h1 / 3.0 + z1) * t.sin()
                - e * z0 * h1 / 6.0 * (2.0 * t).sin()
                + e * h1 / 2.0
        };
        assert!(max_abs_diff(&sol.x_orders[1], x1, 0.0, 2.0 * PI) < 1e-10);
    }
}

#[test]
fn damped_second_order_closed_forms() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..10 {
        let d: f64 = rng.gen_range(0.5..1.5);
        let e: f64 = rng.gen_range(0.5..2.0);
        let c: f64 = rng.gen_range(0.05..0.2);
        let h1: f64 = rng.gen_range(-1.0..-0.3);
        let h2: f64 = rng.gen_range(-0.5..0.5);
        let spec = ProblemSpec::damped(1, c, 1).with_epsilon(e);
        let sol = run_expansion(&spec, &u(d, &[h1, h2])).unwrap();
        let z0 = damped_zeta0(e, c, h1, -1.0);
        let z1 = ((3.0 * c * c * z0.powi(3) + (d + 2.0 * e - 1.0) * 3.0 * c * z0 * z0
            + (c * c + e * e) * 3.0 * z0
            + 3.0 * c * d
            - 2.0 * c * e
            - 3.0 * c)
            * h1
            * h1
            - (3.0 * c * z0 * z0 + 4.0 * z0 * e + 3.0 * c) * e * h1
            + (z0 * z0 + 1.0) * 3.0 * c * h2
            + 6.0 * e * z0)
            / (6.0 * (e - 2.0 * c * h1 * z0));
        let l2 = -e * e / 4.0
            + (-1.0 + d - e / 2.0 - e * e / 3.0 - d * e / 2.0 + c * z0 + c * z1) * h1
            + 0.5 * (-1.0 + d + c * z0) * h2
            + (-0.25 - d / 2.0 + 5.0 * e * e / 12.0 + 3.0 * d * d / 4.0 + c * c * z0 * z0 / 4.0
                + c * d * z0
                + 2.0 * c * e * z0 / 3.0)
                * h1
                * h1;
        close(sol.zeta_orders[1], z1, 1e-9);
        close(sol.lambda_orders[1], l2, 1e-9);
    }
}

#[test]
fn damped_complex_root_needs_complex_mode() {
    let spec = ProblemSpec::damped(1, 0.5, 1).with_epsilon(0.1);
    let err = run_expansion(&spec, &u(1.0, &[-1.0, 0.0])).unwrap_err();
    match err {
        Error::ComplexRootInRealMode { discriminant } => close(discriminant, 0.01 - 1.0, 1e-12),
        e => panic!("unexpected {e:?}"),
    }
    let mut spec = spec;
    spec.field_mode = FieldMode::Complex;
    let sol = run_expansion_in::<Complex64>(&spec, &u(1.0, &[-1.0, 0.0])).unwrap();
    assert!(sol.zeta_orders[0].im.abs() > 0.1);
    for f in &sol.forcings {
        let (c, s) = resonant_content(&spec, f).unwrap();
        assert!(c.norm() < 1e-10 && s.norm() < 1e-10);
    }
}

#[test]
fn assembled_solution_is_in_unscaled_time() {
    let spec = ProblemSpec::classical(2, Start::Cos, 2).with_epsilon(0.5);
    let sol = run_expansion(&spec, &u(0.3, &[-0.5, 0.1, 0.0])).unwrap();
    for i in 0..20 {
        let t = i as f64 * 0.6;
        let tau = t / 2.0;
        let direct: f64 = sol
            .x_orders
            .iter()
            .enumerate()
            .map(|(n, x)| x.eval(tau) / factorial(n))
            .sum();
        close(sol.x_n.eval(t), direct, 1e-12);
    }
}

#[test]
fn rejects_wrong_unknown_length() {
    let spec = ProblemSpec::classical(1, Start::Cos, 2);
    assert!(matches!(
        run_expansion(&spec, &u(0.0, &[1.0])),
        Err(Error::InvalidProblem(_))
    ));
}
