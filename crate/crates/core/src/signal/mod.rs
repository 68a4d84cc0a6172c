//! Exact arithmetic on the function space spanned by
//! `c·t^k·{1, cos(f t), sin(f t)}·H(t − a)` plus Dirac impulses `c·δ(t − a)`.
//!
//! Frequencies are non-negative rationals so that a solution written in the
//! scaled time `τ` can be rewritten in `t = λ·τ` without leaving the basis.
//! Every constructor and operation returns a canonical [`Signal`]: like terms
//! are merged, `cos(0·t)` becomes a constant, `sin(0·t)` vanishes, and
//! coefficients below [`PRUNE_RELATIVE`] times the largest one are dropped.

mod calculus;

pub use calculus::{antiderivative_value, primitive};

use crate::scalar::Scalar;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use thiserror::Error;

/// Relative threshold below which coefficients are treated as zero.
pub const PRUNE_RELATIVE: f64 = 1e-14;

/// Non-negative rational frequency (multiple of the unit angular frequency).
pub type Freq = Ratio<i64>;

/// Integer harmonic as a [`Freq`].
pub fn harmonic(m: i64) -> Freq {
    Freq::from_integer(m)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("product of two signals that both carry Dirac impulses")]
    DiracProduct,
    #[error("Dirac impulse at t = {location} lies on an integration bound")]
    ImpulseOnBoundary { location: f64 },
    #[error("cannot differentiate a signal that carries Dirac impulses")]
    ImpulseDerivative,
    #[error("integration interval [{t0}, {t1}] is empty")]
    EmptyInterval { t0: f64, t1: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Const,
    Cos,
    Sin,
}

/// A time instant used as a Heaviside gate or impulse location.
///
/// Locations within `1e-9` (relative) of a multiple of `π/2` are snapped onto
/// it so that gates produced along different code paths merge exactly.
#[derive(Clone, Copy, Debug)]
pub struct Loc(f64);

impl Loc {
    pub fn new(a: f64) -> Self {
        let k = a / FRAC_PI_2;
        let r = k.round();
        if (k - r).abs() <= 1e-9 * r.abs().max(1.0) {
            Loc(r * FRAC_PI_2)
        } else {
            Loc(a)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl PartialEq for Loc {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Loc {}
impl PartialOrd for Loc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Loc {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Basis function `t^power · kind(freq·t) · H(t − step)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Basis {
    pub power: u32,
    pub kind: Kind,
    pub freq: Freq,
    pub step: Option<Loc>,
}

impl Basis {
    pub fn new(power: u32, kind: Kind, freq: Freq, step: Option<f64>) -> Self {
        let kind = match kind {
            Kind::Cos if freq.is_zero() => Kind::Const,
            k => k,
        };
        Basis {
            power,
            kind,
            freq: canonical_freq(kind, freq),
            step: step.and_then(gate_loc),
        }
    }

    /// Pointwise value with the right-continuous convention `H(0) = 1`.
    pub fn value_at(&self, t: f64) -> f64 {
        if let Some(a) = self.step {
            if t < a.0 {
                return 0.0;
            }
        }
        powi(t, self.power) * trig(self.kind, self.freq, t)
    }
}

fn gate_loc(a: f64) -> Option<Loc> {
    let loc = Loc::new(a);
    (loc.0 > 0.0).then_some(loc)
}

pub(crate) fn powi(t: f64, k: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        t.powi(k as i32)
    }
}

pub(crate) fn freq_f64(f: Freq) -> f64 {
    f.to_f64().unwrap_or(f64::NAN)
}

/// `cos`/`sin` of `f·t`, exact when the angle is a multiple of `π/2`.
pub fn trig(kind: Kind, f: Freq, t: f64) -> f64 {
    match kind {
        Kind::Const => 1.0,
        Kind::Cos => quarter_turn(f, t).map_or_else(|| (freq_f64(f) * t).cos(), |q| QUARTER_COS[q]),
        Kind::Sin => quarter_turn(f, t).map_or_else(|| (freq_f64(f) * t).sin(), |q| QUARTER_SIN[q]),
    }
}

const QUARTER_COS: [f64; 4] = [1.0, 0.0, -1.0, 0.0];
const QUARTER_SIN: [f64; 4] = [0.0, 1.0, 0.0, -1.0];

fn quarter_turn(f: Freq, t: f64) -> Option<usize> {
    let angle = freq_f64(f) * t;
    let k = angle / FRAC_PI_2;
    let r = k.round();
    if (k - r).abs() <= 1e-12 * r.abs().max(1.0) {
        Some(r.rem_euclid(4.0) as usize)
    } else {
        None
    }
}

/// A single term of a [`Signal`], as exposed to callers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term<S> {
    pub coeff: S,
    pub power: u32,
    pub kind: Kind,
    pub harmonic: Freq,
    pub step_at: Option<f64>,
}

/// Dirac impulse `coeff·δ(t − location)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiracTerm<S> {
    pub coeff: S,
    pub location: f64,
}

#[derive(Clone, PartialEq)]
pub struct Signal<S: Scalar = f64> {
    terms: BTreeMap<Basis, S>,
    impulses: BTreeMap<Loc, S>,
}

impl<S: Scalar> Default for Signal<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> Signal<S> {
    pub fn zero() -> Self {
        Signal {
            terms: BTreeMap::new(),
            impulses: BTreeMap::new(),
        }
    }

    pub fn term(coeff: S, power: u32, kind: Kind, freq: Freq, step: Option<f64>) -> Self {
        let mut s = Self::zero();
        s.push(Basis::new(power, kind, freq, step), coeff);
        s.prune();
        s
    }

    pub fn constant(c: S) -> Self {
        Self::term(c, 0, Kind::Const, Freq::zero(), None)
    }

    pub fn cos(f: Freq) -> Self {
        Self::term(S::one(), 0, Kind::Cos, f, None)
    }

    pub fn sin(f: Freq) -> Self {
        Self::term(S::one(), 0, Kind::Sin, f, None)
    }

    /// The monomial `t^k`.
    pub fn monomial(k: u32) -> Self {
        Self::term(S::one(), k, Kind::Const, Freq::zero(), None)
    }

    /// The unit step `H(t − a)`.
    pub fn step(a: f64) -> Self {
        Self::term(S::one(), 0, Kind::Const, Freq::zero(), Some(a))
    }

    pub fn dirac(coeff: S, location: f64) -> Self {
        let mut s = Self::zero();
        s.push_impulse(Loc::new(location), coeff);
        s.prune();
        s
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.impulses.is_empty()
    }

    pub fn has_impulses(&self) -> bool {
        !self.impulses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len() + self.impulses.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = Term<S>> + '_ {
        self.terms.iter().map(|(b, &c)| Term {
            coeff: c,
            power: b.power,
            kind: b.kind,
            harmonic: b.freq,
            step_at: b.step.map(Loc::value),
        })
    }

    pub fn impulses(&self) -> impl Iterator<Item = DiracTerm<S>> + '_ {
        self.impulses.iter().map(|(a, &c)| DiracTerm {
            coeff: c,
            location: a.0,
        })
    }

    pub(crate) fn basis_terms(&self) -> impl Iterator<Item = (&Basis, &S)> + '_ {
        self.terms.iter()
    }

    /// Coefficient of one basis function (zero if absent).
    pub fn coefficient(&self, power: u32, kind: Kind, freq: Freq, step: Option<f64>) -> S {
        let key = Basis::new(power, kind, freq, step);
        self.terms.get(&key).copied().unwrap_or_else(S::zero)
    }

    pub fn impulse_at(&self, location: f64) -> S {
        self.impulses
            .get(&Loc::new(location))
            .copied()
            .unwrap_or_else(S::zero)
    }

    /// Largest coefficient modulus over terms and impulses.
    pub fn max_coeff(&self) -> f64 {
        self.terms
            .values()
            .chain(self.impulses.values())
            .map(|c| c.modulus())
            .fold(0.0, f64::max)
    }

    pub(crate) fn push(&mut self, basis: Basis, coeff: S) {
        let basis = match (basis.kind, basis.freq.is_zero()) {
            (Kind::Sin, true) => return,
            (Kind::Cos, true) => Basis {
                kind: Kind::Const,
                ..basis
            },
            (Kind::Const, false) => unreachable!("constant basis with nonzero frequency"),
            _ => basis,
        };
        *self.terms.entry(basis).or_insert_with(S::zero) += coeff;
    }

    pub(crate) fn push_impulse(&mut self, loc: Loc, coeff: S) {
        *self.impulses.entry(loc).or_insert_with(S::zero) += coeff;
    }

    /// Push `coeff·t^power·kind(f·t)·H` for a signed frequency `f`.
    fn push_signed(&mut self, power: u32, kind: Kind, f: Freq, step: Option<Loc>, coeff: S) {
        let (f, coeff) = if f.is_negative() {
            match kind {
                Kind::Sin => (-f, -coeff),
                _ => (-f, coeff),
            }
        } else {
            (f, coeff)
        };
        self.push(
            Basis {
                power,
                kind,
                freq: f,
                step,
            },
            coeff,
        );
    }

    pub(crate) fn prune(&mut self) {
        let threshold = PRUNE_RELATIVE * self.max_coeff();
        self.terms.retain(|_, c| c.modulus() > threshold);
        self.impulses.retain(|_, c| c.modulus() > threshold);
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (b, &c) in &other.terms {
            out.push(*b, c);
        }
        for (a, &c) in &other.impulses {
            out.push_impulse(*a, c);
        }
        out.prune();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(-S::one())
    }

    pub fn scale(&self, s: S) -> Self {
        let mut out = Self::zero();
        for (b, &c) in &self.terms {
            out.push(*b, c * s);
        }
        for (a, &c) in &self.impulses {
            out.push_impulse(*a, c * s);
        }
        out.prune();
        out
    }

    /// Exact product. Trigonometric products are expanded with the
    /// product-to-sum identities, gates combine as `H(t−a)H(t−b) = H(t−max(a,b))`
    /// and impulses sample the other factor at their location.
    pub fn mul(&self, other: &Self) -> Result<Self, SignalError> {
        if self.has_impulses() && other.has_impulses() {
            return Err(SignalError::DiracProduct);
        }
        let mut out = Self::zero();
        for (ba, &ca) in &self.terms {
            for (bb, &cb) in &other.terms {
                out.push_product(ba, bb, ca * cb);
            }
        }
        for (dirac, smooth) in [(self, other), (other, self)] {
            for (a, &ci) in &dirac.impulses {
                let sample: S = smooth
                    .terms
                    .iter()
                    .map(|(b, &c)| c.scale(b.value_at(a.0)))
                    .sum();
                out.push_impulse(*a, ci * sample);
            }
        }
        out.prune();
        Ok(out)
    }

    fn push_product(&mut self, a: &Basis, b: &Basis, coeff: S) {
        let power = a.power + b.power;
        let step = match (a.step, b.step) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, y) => x.or(y),
        };
        let half = coeff.scale(0.5);
        let (fa, fb) = (a.freq, b.freq);
        match (a.kind, b.kind) {
            (Kind::Const, k) => self.push(Basis { power, kind: k, freq: fb, step }, coeff),
            (k, Kind::Const) => self.push(Basis { power, kind: k, freq: fa, step }, coeff),
            (Kind::Cos, Kind::Cos) => {
                self.push_signed(power, Kind::Cos, fa - fb, step, half);
                self.push_signed(power, Kind::Cos, fa + fb, step, half);
            }
            (Kind::Sin, Kind::Sin) => {
                self.push_signed(power, Kind::Cos, fa - fb, step, half);
                self.push_signed(power, Kind::Cos, fa + fb, step, -half);
            }
            (Kind::Sin, Kind::Cos) => {
                self.push_signed(power, Kind::Sin, fa + fb, step, half);
                self.push_signed(power, Kind::Sin, fa - fb, step, half);
            }
            (Kind::Cos, Kind::Sin) => {
                self.push_signed(power, Kind::Sin, fa + fb, step, half);
                self.push_signed(power, Kind::Sin, fa - fb, step, -half);
            }
        }
    }

    /// Multiply by `H(t − a)`.
    pub fn gated(&self, a: f64) -> Self {
        let gate = Self::step(a);
        self.mul(&gate).expect("a unit step carries no impulses")
    }

    /// Pointwise value; impulses are not part of the pointwise value.
    pub fn eval(&self, t: f64) -> S {
        self.terms.iter().map(|(b, &c)| c.scale(b.value_at(t))).sum()
    }

    /// Exact derivative. Gates contribute `g(a)·δ(t − a)` for the gated
    /// function `g`, which vanishes when `g(a) = 0`.
    pub fn differentiate(&self) -> Result<Self, SignalError> {
        if self.has_impulses() {
            return Err(SignalError::ImpulseDerivative);
        }
        let mut out = Self::zero();
        for (b, &c) in &self.terms {
            if b.power > 0 {
                out.push(
                    Basis {
                        power: b.power - 1,
                        ..*b
                    },
                    c.scale(b.power as f64),
                );
            }
            let f = freq_f64(b.freq);
            match b.kind {
                Kind::Const => {}
                Kind::Cos => out.push(Basis { kind: Kind::Sin, ..*b }, c.scale(-f)),
                Kind::Sin => out.push(Basis { kind: Kind::Cos, ..*b }, c.scale(f)),
            }
            if let Some(a) = b.step {
                let ungated = Basis { step: None, ..*b };
                let jump = ungated.value_at(a.0);
                if jump != 0.0 {
                    out.push_impulse(a, c.scale(jump));
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// The signal `s(t / factor)`.
    pub fn rescale_time(&self, factor: f64) -> Self {
        let mut out = Self::zero();
        let inv = Freq::approximate_float(1.0 / factor).expect("finite rescale factor");
        for (b, &c) in &self.terms {
            out.push(
                Basis {
                    power: b.power,
                    kind: b.kind,
                    freq: b.freq * inv,
                    step: b.step.map(|a| Loc::new(a.0 * factor)),
                },
                c.scale(factor.powi(-(b.power as i32))),
            );
        }
        for (a, &c) in &self.impulses {
            out.push_impulse(Loc::new(a.0 * factor), c.scale(factor));
        }
        out.prune();
        out
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> Signal<T> {
        let mut out = Signal::<T>::zero();
        for (b, &c) in &self.terms {
            out.push(*b, f(c));
        }
        for (a, &c) in &self.impulses {
            out.push_impulse(*a, f(c));
        }
        out.prune();
        out
    }

    /// Sum of the terms whose basis matches `pred`.
    pub fn filter(&self, pred: impl Fn(&Term<S>) -> bool) -> Self {
        let mut out = Self::zero();
        for (b, &c) in &self.terms {
            let t = Term {
                coeff: c,
                power: b.power,
                kind: b.kind,
                harmonic: b.freq,
                step_at: b.step.map(Loc::value),
            };
            if pred(&t) {
                out.push(*b, c);
            }
        }
        out
    }

    /// Drop impulses, keeping the pointwise part.
    pub fn without_impulses(&self) -> Self {
        Signal {
            terms: self.terms.clone(),
            impulses: BTreeMap::new(),
        }
    }

    pub fn from_real(s: &Signal<f64>) -> Self {
        s.map(S::from_f64)
    }

    pub fn real_part(&self) -> Signal<f64> {
        self.map(Scalar::re)
    }
}

fn canonical_freq(kind: Kind, f: Freq) -> Freq {
    match kind {
        Kind::Const => Freq::zero(),
        _ => f.abs(),
    }
}

impl<S: Scalar> fmt::Debug for Signal<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<S: Scalar> fmt::Display for Signal<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for t in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:?})", t.coeff)?;
            if t.power > 0 {
                write!(f, "·t^{}", t.power)?;
            }
            match t.kind {
                Kind::Const => {}
                Kind::Cos => write!(f, "·cos({}t)", t.harmonic)?,
                Kind::Sin => write!(f, "·sin({}t)", t.harmonic)?,
            }
            if let Some(a) = t.step_at {
                write!(f, "·H(t-{a})")?;
            }
        }
        for d in self.impulses() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:?})·δ(t-{})", d.coeff, d.location)?;
        }
        Ok(())
    }
}
