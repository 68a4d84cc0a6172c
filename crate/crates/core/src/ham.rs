//! Order-by-order homotopy recursion.
//!
//! With `τ = t/λ(p)` and the excitation frozen at `p = 1`, the homotopy is
//!
//! ```text
//! (1 − p)(X'' + λ²X) − h(p)·N[X] + Π(p) = 0,
//! N[X] = X'' + λ²(δ + εE(τ))X + cλX',
//! ```
//!
//! where `Π = εp(1 − p)cos(λ₀τ)` for the damped variant and zero otherwise.
//! Everything numeric is held as Taylor coefficients in `p`; the public
//! quantities (`x⁽ⁿ⁾`, `λ⁽ⁿ⁾`, `ζ⁽ⁿ⁾`, forcings) use derivative values.

use crate::error::{Error, Result};
use crate::jet::{cauchy_at, Jet, JetCoeff, JetProduct};
use crate::problem::{ProblemSpec, Start, UnknownVector, Variant, ZetaRoot};
use crate::scalar::Scalar;
use crate::signal::{harmonic, Freq, Kind, Signal};
use std::f64::consts::PI;

/// Coefficient field usable by the expansion.
pub trait HamScalar:
    Scalar + JetCoeff + JetProduct<Self, Output = Self> + JetProduct<Signal<Self>, Output = Signal<Self>>
{
}

impl<S> HamScalar for S where
    S: Scalar + JetCoeff + JetProduct<S, Output = S> + JetProduct<Signal<S>, Output = Signal<S>>
{
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Zeroth-order solution. For the damped start the `ζ⁽⁰⁾` part is returned
/// separately as the direction it multiplies.
#[derive(Clone, Debug, PartialEq)]
pub struct ZerothSolution<S: Scalar> {
    pub fixed: Signal<S>,
    pub zeta_direction: Option<Signal<S>>,
}

impl<S: Scalar> ZerothSolution<S> {
    pub fn with_zeta(&self, zeta: S) -> Signal<S> {
        match &self.zeta_direction {
            Some(d) => self.fixed.add(&d.scale(zeta)),
            None => self.fixed.clone(),
        }
    }
}

fn lambda0_freq(spec: &ProblemSpec) -> Freq {
    harmonic(spec.lambda0 as i64)
}

/// Homogeneous solution with `x(0) = 0`, `ẋ(0) = 1`.
fn unit_velocity<S: Scalar>(spec: &ProblemSpec) -> Signal<S> {
    Signal::sin(lambda0_freq(spec)).scale(S::from_f64(1.0 / spec.lambda0 as f64))
}

pub fn zeroth_solution<S: Scalar>(spec: &ProblemSpec) -> ZerothSolution<S> {
    let f = lambda0_freq(spec);
    match spec.start {
        Start::Cos => ZerothSolution {
            fixed: Signal::cos(f),
            zeta_direction: None,
        },
        Start::Sin => ZerothSolution {
            fixed: unit_velocity(spec),
            zeta_direction: None,
        },
        Start::Zeta => ZerothSolution {
            fixed: Signal::cos(f),
            zeta_direction: Some(unit_velocity(spec)),
        },
    }
}

/// Frozen excitation `E(τ)`. The impulsive train is restricted to the first
/// period `τ ∈ [0, 2π]`: `δ(λ₁τ − (2k+1)π) = δ(τ − (2k+1)π/λ₁)/λ₁`.
pub fn excitation<S: Scalar>(spec: &ProblemSpec) -> Signal<S> {
    let l1 = spec.lambda1 as i64;
    match spec.variant {
        Variant::Classical | Variant::Damped => Signal::cos(harmonic(l1)),
        Variant::Impulsive => (0..l1).fold(Signal::zero(), |acc, k| {
            let at = (2 * k + 1) as f64 * PI / l1 as f64;
            acc.add(&Signal::dirac(S::from_f64(1.0 / l1 as f64), at))
        }),
    }
}

/// Order-`n` forcing of `ẍ⁽ⁿ⁾ + λ₀²x⁽ⁿ⁾`, affine in the unknowns fixed at
/// this order:
/// `base + λ⁽ⁿ⁾·dir_lambda + ζ·dir_zeta + λ⁽ⁿ⁾ζ·dir_lambda_zeta`,
/// with `ζ = ζ⁽ⁿ⁻¹⁾`. The bilinear part only appears at order 1 of the
/// damped expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForcing<S: Scalar> {
    pub base: Signal<S>,
    pub dir_lambda: Signal<S>,
    pub dir_zeta: Option<Signal<S>>,
    pub dir_lambda_zeta: Option<Signal<S>>,
}

impl<S: Scalar> AffineForcing<S> {
    pub fn resolve(&self, lambda: S, zeta: Option<S>) -> Signal<S> {
        let mut f = self.base.add(&self.dir_lambda.scale(lambda));
        if let Some(z) = zeta {
            if let Some(d) = &self.dir_zeta {
                f = f.add(&d.scale(z));
            }
            if let Some(d) = &self.dir_lambda_zeta {
                f = f.add(&d.scale(lambda * z));
            }
        }
        f
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecularResolution<S: Scalar> {
    pub lambda: S,
    pub zeta_prev: Option<S>,
    pub resolved: Signal<S>,
}

/// Resonant content of a forcing as `(cos part, sin part)`: the
/// coefficients of `cos λ₀τ`, `sin λ₀τ`, or for the impulsive variant the
/// integrals of `cos λ₀τ · F` and `sin λ₀τ · F` over `[0, 2π]`.
pub fn resonant_content<S: Scalar>(spec: &ProblemSpec, f: &Signal<S>) -> Result<(S, S)> {
    let w = lambda0_freq(spec);
    match spec.variant {
        Variant::Impulsive => {
            let c = Signal::cos(w).mul(f)?.definite_integral(0.0, 2.0 * PI)?;
            let s = Signal::sin(w).mul(f)?.definite_integral(0.0, 2.0 * PI)?;
            Ok((c, s))
        }
        _ => Ok((
            f.coefficient(0, Kind::Cos, w, None),
            f.coefficient(0, Kind::Sin, w, None),
        )),
    }
}

/// Fix `λ⁽ⁿ⁾` (and `ζ⁽ⁿ⁻¹⁾` when damped) so the resolved forcing has no
/// resonant content.
pub fn remove_secular<S: Scalar>(
    spec: &ProblemSpec,
    n: usize,
    f: &AffineForcing<S>,
) -> Result<SecularResolution<S>> {
    let (bc, bs) = resonant_content(spec, &f.base)?;
    let (lc, ls) = resonant_content(spec, &f.dir_lambda)?;
    let singular = || Error::SingularSecularSystem { order: n };
    let (lambda, zeta) = match spec.start {
        Start::Cos | Start::Sin => {
            let (b, l) = if spec.start == Start::Cos { (bc, lc) } else { (bs, ls) };
            if l.modulus() == 0.0 {
                return Err(singular());
            }
            (-b / l, None)
        }
        Start::Zeta => {
            let dz = f.dir_zeta.as_ref().ok_or_else(singular)?;
            let (zc, zs) = resonant_content(spec, dz)?;
            match &f.dir_lambda_zeta {
                Some(m) => {
                    let (_, ms) = resonant_content(spec, m)?;
                    first_order_zeta(spec, n, [bc, bs], [lc, ls], [zc, zs], ms)?
                }
                None => {
                    let det = lc * zs - zc * ls;
                    let scale = (lc.modulus() + zc.modulus()) * (ls.modulus() + zs.modulus());
                    if det.modulus() <= 1e-13 * scale || scale == 0.0 {
                        return Err(singular());
                    }
                    let lambda = (zc * bs - zs * bc) / det;
                    let zeta = (ls * bc - lc * bs) / det;
                    (lambda, Some(zeta))
                }
            }
        }
    };
    Ok(SecularResolution {
        lambda,
        zeta_prev: zeta,
        resolved: f.resolve(lambda, zeta),
    })
}

/// Order-1 damped system
/// `b_c + ζ z_c + λ l_c = 0`, `b_s + ζ z_s + λ ζ m_s = 0`.
/// Eliminating `λ` gives `Aζ² + Bζ + C = 0`.
fn first_order_zeta<S: Scalar>(
    spec: &ProblemSpec,
    n: usize,
    [bc, bs]: [S; 2],
    [lc, _]: [S; 2],
    [zc, zs]: [S; 2],
    ms: S,
) -> Result<(S, Option<S>)> {
    if lc.modulus() == 0.0 {
        return Err(Error::SingularSecularSystem { order: n });
    }
    let a = -ms * zc;
    let b = zs * lc - ms * bc;
    let c = bs * lc;
    let size = b.modulus() + c.modulus();
    let zeta = if a.modulus() <= 1e-14 * size {
        if b.modulus() == 0.0 {
            return Err(Error::SingularSecularSystem { order: n });
        }
        -c / b
    } else {
        let disc = b * b - S::from_f64(4.0) * a * c;
        let root = disc.sqrt_checked().ok_or(Error::ComplexRootInRealMode {
            discriminant: disc.re() / 4.0,
        })?;
        let sign = match spec.zeta0_root {
            ZetaRoot::Plus => 1.0,
            ZetaRoot::Minus => -1.0,
        };
        let num = -b + root.scale(sign);
        if num.modulus() < 0.5 * b.modulus() {
            // Cancellation: use the product of roots C/A instead.
            (c + c) / (-b - root.scale(sign))
        } else {
            num / (a + a)
        }
    };
    let lambda = -(bc + zeta * zc) / lc;
    Ok((lambda, Some(zeta)))
}

/// Partial expansion state: everything fixed below the current order.
#[derive(Clone, Debug)]
pub struct HamState<S: HamScalar> {
    spec: ProblemSpec,
    potential: Signal<S>,
    damping: S,
    /// Taylor coefficients of `h(p)`, `h₀ = 0`.
    h: Vec<S>,
    /// Taylor coefficients of `λ(p)` fixed so far.
    ell: Vec<S>,
    /// Taylor coefficients of `X(τ; p)`.
    a: Vec<Signal<S>>,
    da: Vec<Signal<S>>,
    dda: Vec<Signal<S>>,
    pa: Vec<Signal<S>>,
    nl: Vec<Signal<S>>,
    zeta: Vec<S>,
    zeta_direction: Option<Signal<S>>,
}

impl<S: HamScalar> HamState<S> {
    pub fn new(spec: &ProblemSpec, u: &UnknownVector) -> Result<Self> {
        spec.validate()?;
        if u.h.len() != spec.order + 1 {
            return Err(Error::InvalidProblem(format!(
                "expected {} convergence-control values, got {}",
                spec.order + 1,
                u.h.len()
            )));
        }
        let potential = Signal::constant(S::from_f64(u.delta))
            .add(&excitation::<S>(spec).scale(S::from_f64(spec.epsilon)));
        let h = std::iter::once(<S as Scalar>::zero())
            .chain(
                u.h.iter()
                    .enumerate()
                    .map(|(i, &v)| S::from_f64(v / factorial(i + 1))),
            )
            .collect();
        let zeroth = zeroth_solution::<S>(spec);
        let mut state = HamState {
            spec: spec.clone(),
            potential,
            damping: S::from_f64(spec.damping),
            h,
            ell: vec![S::from_f64(spec.lambda0 as f64)],
            a: vec![],
            da: vec![],
            dda: vec![],
            pa: vec![],
            nl: vec![],
            zeta: vec![],
            zeta_direction: zeroth.zeta_direction,
        };
        state.push_order(zeroth.fixed)?;
        Ok(state)
    }

    fn lambda_sq(&self, k: usize) -> Result<S> {
        Ok(cauchy_at(&self.ell, &self.ell, k)?)
    }

    fn lambda_sq_known(&self) -> Result<Vec<S>> {
        (0..self.ell.len()).map(|k| self.lambda_sq(k)).collect()
    }

    fn push_order(&mut self, ak: Signal<S>) -> Result<()> {
        self.a.push(ak);
        self.da.push(Signal::zero());
        self.dda.push(Signal::zero());
        self.pa.push(Signal::zero());
        self.nl.push(Signal::zero());
        self.refresh(self.a.len() - 1)
    }

    fn refresh(&mut self, k: usize) -> Result<()> {
        let d = self.a[k].differentiate()?;
        self.dda[k] = d.differentiate().or_else(|_| d.without_impulses().differentiate())?;
        self.da[k] = d;
        self.pa[k] = self.potential.mul(&self.a[k])?;
        self.nl[k] = self.nonlinear(k)?;
        Ok(())
    }

    /// `N_k = a_k'' + Σ Λ_i (δ+εE) a_{k−i} + c Σ ℓ_i a'_{k−i}`.
    fn nonlinear(&self, k: usize) -> Result<Signal<S>> {
        let lam_sq = self.lambda_sq_known()?;
        let mut out = self.dda[k].add(&cauchy_at(&lam_sq, &self.pa, k)?);
        if self.damping.modulus() != 0.0 {
            out = out.add(&cauchy_at(&self.ell, &self.da, k)?.scale(self.damping));
        }
        Ok(out)
    }

    /// `N₀`-type operator applied to `v` at the lowest order.
    fn nonlinear_leading(&self, v: &Signal<S>) -> Result<Signal<S>> {
        let dv = v.differentiate()?;
        let lam0 = self.ell[0];
        Ok(dv
            .differentiate()?
            .add(&self.potential.mul(v)?.scale(lam0 * lam0))
            .add(&dv.scale(self.damping * lam0)))
    }

    fn auxiliary(&self, n: usize) -> Signal<S> {
        let coeff = match (self.spec.variant, n) {
            (Variant::Damped, 1) => self.spec.epsilon,
            (Variant::Damped, 2) => -self.spec.epsilon,
            _ => return Signal::zero(),
        };
        Signal::cos(lambda0_freq(&self.spec)).scale(S::from_f64(coeff))
    }

    /// Affine forcing of the order-`n` deformation equation. Requires orders
    /// below `n` to be fixed, except for the pending `ζ⁽ⁿ⁻¹⁾`.
    pub fn deformation_rhs(&self, n: usize) -> Result<AffineForcing<S>> {
        assert!(n >= 1 && self.ell.len() == n && self.a.len() == n);
        let (lam_jet, mult) = Jet::new(self.ell.clone()).square_linear_slot(n)?;
        let lam_sq = lam_jet.coeffs();

        // −[Y]_n without the a_n and λ_n slots, plus [Y]_{n−1}.
        let y_n = cauchy_at(lam_sq, &self.a, n)?;
        let y_prev = self.dda[n - 1].add(&cauchy_at(lam_sq, &self.a, n - 1)?);
        let h_n = cauchy_at(&self.h, &self.nl, n)?;
        let taylor = y_prev.sub(&y_n).add(&h_n).sub(&self.auxiliary(n));

        let nf = S::from_f64(factorial(n));
        let base = taylor.scale(nf);
        let dir_lambda = self.a[0].scale(-mult);

        let (dir_zeta, dir_lambda_zeta) = match &self.zeta_direction {
            None => (None, None),
            Some(v) => {
                let lam1 = if n >= 2 { lam_sq[1] } else { <S as Scalar>::zero() };
                let dz = self
                    .nonlinear_leading(v)?
                    .scale(self.h[1])
                    .sub(&v.scale(lam1))
                    .scale(S::from_f64(n as f64));
                let dlz = (n == 1).then(|| v.scale(-mult));
                (Some(dz), dlz)
            }
        };
        Ok(AffineForcing {
            base,
            dir_lambda,
            dir_zeta,
            dir_lambda_zeta,
        })
    }

    /// Record the order-`n` resolution and, for `n ≤ N`, solve for `x⁽ⁿ⁾`.
    pub fn absorb(&mut self, n: usize, res: &SecularResolution<S>) -> Result<Option<Signal<S>>> {
        self.ell.push(res.lambda.scale(1.0 / factorial(n)));
        if let (Some(z), Some(v)) = (res.zeta_prev, &self.zeta_direction) {
            let k = n - 1;
            self.zeta.push(z);
            self.a[k] = self.a[k].add(&v.scale(z.scale(1.0 / factorial(k))));
            self.refresh(k)?;
        }
        if n > self.spec.order {
            return Ok(None);
        }
        let zero = <S as Scalar>::zero();
        let x = res
            .resolved
            .solve_oscillator(lambda0_freq(&self.spec), zero, zero);
        self.push_order(x.scale(S::from_f64(1.0 / factorial(n))))?;
        Ok(Some(x))
    }

    pub fn lambda_taylor(&self) -> &[S] {
        &self.ell
    }

    /// `x⁽ᵏ⁾` in derivative convention.
    pub fn x_order(&self, k: usize) -> Signal<S> {
        self.a[k].scale(S::from_f64(factorial(k)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamSolution<S: Scalar = f64> {
    /// `x⁽⁰⁾..x⁽ᴺ⁾` in `τ`.
    pub x_orders: Vec<Signal<S>>,
    /// `λ⁽¹⁾..λ⁽ᴺ⁺¹⁾`.
    pub lambda_orders: Vec<S>,
    /// `ζ⁽⁰⁾..ζ⁽ᴺ⁾`, damped only.
    pub zeta_orders: Vec<S>,
    /// Resolved forcings `F₁..F_{N+1}` in `τ`.
    pub forcings: Vec<Signal<S>>,
    /// `x_N(t) = Σ x⁽ⁿ⁾(t/λ(1))/n!`.
    pub x_n: Signal<S>,
    /// `λ(1) − (λ₀ + Σ λ⁽ⁿ⁾/n!)`.
    pub lambda_residual: S,
}

pub fn run_expansion(spec: &ProblemSpec, u: &UnknownVector) -> Result<HamSolution<f64>> {
    run_expansion_in::<f64>(spec, u)
}

/// Run the recursion in the field `S`.
pub fn run_expansion_in<S: HamScalar>(spec: &ProblemSpec, u: &UnknownVector) -> Result<HamSolution<S>> {
    let mut state = HamState::<S>::new(spec, u)?;
    let mut lambda_orders = Vec::with_capacity(spec.order + 1);
    let mut forcings = Vec::with_capacity(spec.order + 1);
    for n in 1..=spec.order + 1 {
        let f = state.deformation_rhs(n)?;
        let res = remove_secular(spec, n, &f)?;
        state.absorb(n, &res)?;
        lambda_orders.push(res.lambda);
        forcings.push(res.resolved);
    }
    let x_orders: Vec<_> = (0..=spec.order).map(|k| state.x_order(k)).collect();
    let x_tau = state.a.iter().fold(Signal::zero(), |acc, ak| acc.add(ak));
    let total: S = state.ell.iter().copied().sum();
    Ok(HamSolution {
        x_orders,
        lambda_orders,
        zeta_orders: state.zeta.clone(),
        forcings,
        x_n: x_tau.rescale_time(spec.lambda1 as f64),
        lambda_residual: S::from_f64(spec.lambda1 as f64) - total,
    })
}

#[cfg(test)]
mod tests;
