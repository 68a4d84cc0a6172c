//! Residual of the original equation on `x_N(t)` and its weighted
//! projections.

use crate::error::Result;
use crate::problem::{ProblemSpec, Start, Variant};
use crate::scalar::Scalar;
use crate::signal::{harmonic, Freq, Kind, Signal};
use num_traits::{Signed, Zero};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    pub weights: Vec<Signal<f64>>,
    pub period: f64,
}

/// Distinct frequencies `|λ₀/λ₁ + j|` in increasing order.
fn basis_frequencies(spec: &ProblemSpec, count: usize) -> Vec<Freq> {
    let base = Freq::new(spec.lambda0 as i64, spec.lambda1 as i64);
    let frac = base - base.floor();
    let mut out = vec![];
    let mut j = 0i64;
    while out.len() < count + 1 {
        for f in [frac + Freq::from_integer(j), (frac - Freq::from_integer(j + 1)).abs()] {
            if !out.contains(&f) {
                out.push(f);
            }
        }
        j += 1;
    }
    out.sort();
    out
}

impl WeightSet {
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        let count = spec.order + 1;
        let weights = match spec.variant {
            Variant::Classical => {
                let kind = if spec.start == Start::Sin { Kind::Sin } else { Kind::Cos };
                basis_frequencies(spec, count)
                    .into_iter()
                    .filter(|f| kind == Kind::Cos || !f.is_zero())
                    .take(count)
                    .map(|f| Signal::term(1.0, 0, kind, f, None))
                    .collect()
            }
            Variant::Damped => basis_frequencies(spec, count)
                .into_iter()
                .flat_map(|f| {
                    let c = Signal::term(1.0, 0, Kind::Cos, f, None);
                    let s = (!f.is_zero()).then(|| Signal::term(1.0, 0, Kind::Sin, f, None));
                    std::iter::once(c).chain(s)
                })
                .take(count)
                .collect(),
            Variant::Impulsive => impulsive_weights(spec.lambda1, count),
        };
        WeightSet {
            weights,
            period: spec.period(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `t, cos t` (2π) or `t, t cos t` (4π), then gated harmonics
/// `H(t − a)·{cos, sin}(m t)` for each impulse instant `a`, `m = 1, 2, …`.
fn impulsive_weights(lambda1: u32, count: usize) -> Vec<Signal<f64>> {
    let mut w = vec![Signal::monomial(1)];
    w.push(if lambda1 == 1 {
        Signal::cos(harmonic(1))
    } else {
        Signal::term(1.0, 1, Kind::Cos, harmonic(1), None)
    });
    let gates: Vec<f64> = (0..lambda1).map(|k| (2 * k + 1) as f64 * PI).collect();
    let mut m = 1;
    while w.len() < count {
        for &a in &gates {
            for kind in [Kind::Cos, Kind::Sin] {
                w.push(Signal::term(1.0, 0, kind, harmonic(m), Some(a)));
            }
        }
        m += 1;
    }
    w.truncate(count);
    w
}

/// Residual of the original equation in `t`. Impulse-free `x_N` is required;
/// the impulsive excitation is restricted to one solution period.
pub fn residual_signal<S: Scalar>(spec: &ProblemSpec, x_n: &Signal<S>) -> Result<Signal<S>> {
    let dx = x_n.differentiate()?;
    let ddx = dx.differentiate()?;
    let eps = S::from_f64(spec.epsilon);
    let mut potential = Signal::constant(S::from_f64(spec.delta));
    match spec.variant {
        Variant::Classical | Variant::Damped => {
            potential = potential.add(&Signal::cos(harmonic(1)).scale(eps));
        }
        Variant::Impulsive => {
            for a in spec.impulse_times() {
                potential = potential.add(&Signal::dirac(eps, a));
            }
        }
    }
    let mut r = ddx.add(&potential.mul(x_n)?);
    if spec.variant == Variant::Damped {
        r = r.add(&dx.scale(S::from_f64(spec.damping)));
    }
    Ok(r)
}

/// `∫₀^T w·R dt` for every weight.
pub fn project<S: Scalar>(residual: &Signal<S>, ws: &WeightSet) -> Result<Vec<S>> {
    ws.weights
        .iter()
        .map(|w| {
            Ok(Signal::<S>::from_real(w)
                .mul(residual)?
                .definite_integral(0.0, ws.period)?)
        })
        .collect()
}
