use super::{freq_f64, powi, trig, Basis, Freq, Kind, Loc, Signal, SignalError};
use crate::scalar::Scalar;
use num_complex::Complex64;
use num_traits::Zero;

/// Antiderivative of `t^k·kind(q t)` as `(power, kind, coeff)` triples at the
/// same frequency `q`, from `∫ t^k e^{iqt} dt = e^{iqt} Σ_j (−1)^j k!/(k−j)! t^{k−j} / (iq)^{j+1}`.
pub fn primitive(k: u32, kind: Kind, q: Freq) -> Vec<(u32, Kind, f64)> {
    if kind == Kind::Const || q.is_zero() {
        return vec![(k + 1, Kind::Const, 1.0 / (k + 1) as f64)];
    }
    let iq = Complex64::new(0.0, freq_f64(q));
    let mut out = Vec::with_capacity(2 * (k as usize + 1));
    let mut falling = 1.0; // k!/(k-j)!
    let mut denom = iq; // (iq)^{j+1}
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let c = Complex64::new(sign * falling, 0.0) / denom;
        let p = k - j;
        match kind {
            Kind::Cos => {
                out.push((p, Kind::Cos, c.re));
                out.push((p, Kind::Sin, -c.im));
            }
            Kind::Sin => {
                out.push((p, Kind::Cos, c.im));
                out.push((p, Kind::Sin, c.re));
            }
            Kind::Const => unreachable!(),
        }
        falling *= (k - j) as f64;
        denom *= iq;
    }
    out
}

/// Value at `t` of the antiderivative returned by [`primitive`].
pub fn antiderivative_value(k: u32, kind: Kind, q: Freq, t: f64) -> f64 {
    primitive(k, kind, q)
        .into_iter()
        .map(|(p, kd, c)| c * powi(t, p) * trig(kd, q, t))
        .sum()
}

fn on_boundary(a: f64, t: f64) -> bool {
    (a - t).abs() <= 1e-12 * a.abs().max(1.0)
}

impl<S: Scalar> Signal<S> {
    /// Exact value of `∫_{t0}^{t1} s(t) dt`. Gates clip the range; an impulse
    /// contributes its coefficient when it lies strictly inside.
    pub fn definite_integral(&self, t0: f64, t1: f64) -> Result<S, SignalError> {
        if t0 >= t1 {
            return Err(SignalError::EmptyInterval { t0, t1 });
        }
        let mut total = S::zero();
        for d in self.impulses() {
            if on_boundary(d.location, t0) || on_boundary(d.location, t1) {
                return Err(SignalError::ImpulseOnBoundary {
                    location: d.location,
                });
            }
            if d.location > t0 && d.location < t1 {
                total += d.coeff;
            }
        }
        for (b, &c) in self.basis_terms() {
            let lo = b.step.map_or(t0, |a| a.value().max(t0));
            if lo < t1 {
                let hi_v = antiderivative_value(b.power, b.kind, b.freq, t1);
                let lo_v = antiderivative_value(b.power, b.kind, b.freq, lo);
                total += c.scale(hi_v - lo_v);
            }
        }
        Ok(total)
    }

    /// The signal `τ ↦ ∫_0^τ s(σ) dσ` for `τ ≥ 0`; an impulse at `a`
    /// integrates to a step `H(τ − a)`.
    pub fn integral_from_zero(&self) -> Self {
        let mut out = Self::zero();
        for (b, &c) in self.basis_terms() {
            let start = b.step.map_or(0.0, Loc::value);
            let prim = primitive(b.power, b.kind, b.freq);
            let mut offset = 0.0;
            for (p, kind, pc) in prim {
                offset += pc * powi(start, p) * trig(kind, b.freq, start);
                out.push(
                    Basis {
                        power: p,
                        kind,
                        freq: b.freq,
                        step: b.step,
                    },
                    c.scale(pc),
                );
            }
            out.push(Basis::new(0, Kind::Const, Freq::zero(), b.step.map(Loc::value)), c.scale(-offset));
        }
        for d in self.impulses() {
            out.push(
                Basis::new(0, Kind::Const, Freq::zero(), Some(d.location)),
                d.coeff,
            );
        }
        out.prune();
        out
    }

    /// Solve `ẍ + x = forcing` with `x(0) = x0`, `ẋ(0) = v0`.
    pub fn solve_sho(&self, x0: S, v0: S) -> Self {
        self.solve_oscillator(Freq::from_integer(1), x0, v0)
    }

    /// Solve `ẍ + ω²x = forcing`, `x(0) = x0`, `ẋ(0) = v0`, via the Duhamel
    /// integral `(1/ω)∫_0^τ sin(ω(τ−s)) F(s) ds` written as
    /// `(1/ω)[sin ωτ ∫cos(ωs)F − cos ωτ ∫sin(ωs)F]`. The result carries no
    /// impulses; an impulse at `a` produces a gated `sin(ω(τ−a))` response.
    pub fn solve_oscillator(&self, omega: Freq, x0: S, v0: S) -> Self {
        let w = freq_f64(omega);
        let cos_w = Self::cos(omega);
        let sin_w = Self::sin(omega);
        let int_cos = cos_w
            .mul(self)
            .expect("cos carries no impulses")
            .integral_from_zero();
        let int_sin = sin_w
            .mul(self)
            .expect("sin carries no impulses")
            .integral_from_zero();
        let particular = sin_w
            .mul(&int_cos)
            .expect("impulse-free")
            .sub(&cos_w.mul(&int_sin).expect("impulse-free"))
            .scale(S::from_f64(1.0 / w));
        particular
            .add(&cos_w.scale(x0))
            .add(&sin_w.scale(v0.scale(1.0 / w)))
    }
}
