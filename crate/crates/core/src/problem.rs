//! Problem description shared by the expansion engine, the Galerkin
//! projector and the solver.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Which Mathieu-type oscillator is being studied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `ẍ + (δ + ε cos t) x = 0`
    Classical,
    /// `ẍ + c ẋ + (δ + ε cos t) x = 0`
    Damped,
    /// `ẍ + (Δ + ε Σ_k δ(t − (2k+1)π)) x = 0`
    Impulsive,
}

/// Initial condition of the zeroth-order solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    /// `(1, 0)`, zeroth solution `cos τ`.
    Cos,
    /// `(0, 1)`, zeroth solution `sin τ`.
    Sin,
    /// `(1, ζ)` with `ζ` expanded in `p`; damped variant only.
    Zeta,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZetaRoot {
    #[default]
    Minus,
    Plus,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldMode {
    #[default]
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub variant: Variant,
    pub epsilon: f64,
    /// `δ` (classical, damped) or `Δ` (impulsive). Overridden by the unknown
    /// vector during a solve.
    pub delta: f64,
    pub damping: f64,
    /// Target period multiplier: the periodic solution has period `2π·lambda1`.
    pub lambda1: u32,
    /// Frequency of the zeroth-order solution in scaled time. Values other
    /// than 1 are experimental.
    pub lambda0: u32,
    pub start: Start,
    /// Expansion order `N`.
    pub order: usize,
    pub zeta0_root: ZetaRoot,
    pub field_mode: FieldMode,
}

impl ProblemSpec {
    pub fn new(variant: Variant, lambda1: u32, start: Start, order: usize) -> Self {
        ProblemSpec {
            variant,
            epsilon: 0.0,
            delta: 0.0,
            damping: 0.0,
            lambda1,
            lambda0: 1,
            start,
            order,
            zeta0_root: ZetaRoot::Minus,
            field_mode: FieldMode::Real,
        }
    }

    pub fn classical(lambda1: u32, start: Start, order: usize) -> Self {
        Self::new(Variant::Classical, lambda1, start, order)
    }

    pub fn impulsive(lambda1: u32, start: Start, order: usize) -> Self {
        Self::new(Variant::Impulsive, lambda1, start, order)
    }

    pub fn damped(lambda1: u32, damping: f64, order: usize) -> Self {
        ProblemSpec {
            damping,
            ..Self::new(Variant::Damped, lambda1, Start::Zeta, order)
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProblem(m.to_string()));
        match (self.variant, self.start) {
            (Variant::Damped, Start::Zeta) => {}
            (Variant::Damped, _) => return bad("the damped variant uses the (1, zeta) start"),
            (_, Start::Zeta) => return bad("the (1, zeta) start is only defined for the damped variant"),
            _ => {}
        }
        if self.order < 1 {
            return bad("expansion order must be at least 1");
        }
        if !(1..=2).contains(&self.lambda1) {
            return bad("lambda1 must be 1 (2π-periodic) or 2 (4π-periodic)");
        }
        if self.lambda0 < 1 {
            return bad("lambda0 must be at least 1");
        }
        if !self.epsilon.is_finite() || !self.delta.is_finite() {
            return bad("epsilon and delta must be finite");
        }
        if self.damping < 0.0 || !self.damping.is_finite() {
            return bad("damping must be a finite non-negative number");
        }
        Ok(())
    }

    /// Period of the sought solution in unscaled time.
    pub fn period(&self) -> f64 {
        2.0 * PI * self.lambda1 as f64
    }

    /// Number of unknowns `δ, h⁽¹⁾..h⁽ᴺ⁺¹⁾`.
    pub fn unknown_count(&self) -> usize {
        self.order + 2
    }

    /// Impulse instants of the excitation inside one solution period, in `t`.
    pub fn impulse_times(&self) -> Vec<f64> {
        (0..self.lambda1)
            .map(|k| (2 * k + 1) as f64 * PI)
            .collect()
    }
}

/// Unknowns of one algebraic solve: `δ` and the convergence-control
/// derivatives `h⁽¹⁾..h⁽ᴺ⁺¹⁾` (derivative-value convention).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownVector {
    pub delta: f64,
    pub h: Vec<f64>,
}

impl UnknownVector {
    pub fn new(delta: f64, h: Vec<f64>) -> Self {
        UnknownVector { delta, h }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.delta).chain(self.h.iter().copied()).collect()
    }

    pub fn from_slice(u: &[f64]) -> Self {
        UnknownVector {
            delta: u[0],
            h: u[1..].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.h.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A named transition-curve branch: tongue, side, and the expansion start
/// that reaches it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Boundary of the tongue at `δ = 0` (2π-periodic).
    P2Zero,
    /// Left boundary of the tongue at `δ = 1` (2π-periodic).
    P2Left,
    /// Right boundary of the tongue at `δ = 1` (2π-periodic).
    P2Right,
    /// Left boundary of the tongue at `δ = 1/4` (4π-periodic).
    P4Left,
    /// Right boundary of the tongue at `δ = 1/4` (4π-periodic).
    P4Right,
}

impl Branch {
    pub const ALL: [Branch; 5] = [
        Branch::P2Zero,
        Branch::P2Left,
        Branch::P2Right,
        Branch::P4Left,
        Branch::P4Right,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Branch::P2Zero => "p2-zero",
            Branch::P2Left => "p2-left",
            Branch::P2Right => "p2-right",
            Branch::P4Left => "p4-left",
            Branch::P4Right => "p4-right",
        }
    }

    pub fn lambda1(self) -> u32 {
        match self {
            Branch::P2Zero | Branch::P2Left | Branch::P2Right => 1,
            Branch::P4Left | Branch::P4Right => 2,
        }
    }

    /// `δ` at which the branch leaves the `ε = 0` axis.
    pub fn emanation(self) -> f64 {
        match self {
            Branch::P2Zero => 0.0,
            Branch::P2Left | Branch::P2Right => 1.0,
            Branch::P4Left | Branch::P4Right => 0.25,
        }
    }

    /// Half-width of the initial δ search window: half the distance to the
    /// nearest neighbouring emanation point `k²/4`.
    pub fn window_half_width(self) -> f64 {
        match self {
            Branch::P2Zero | Branch::P4Left | Branch::P4Right => 0.125,
            Branch::P2Left | Branch::P2Right => 0.375,
        }
    }

    /// Zeroth-order start that produces this branch for `ε > 0`.
    pub fn start(self, variant: Variant) -> Start {
        match (variant, self) {
            (Variant::Damped, _) => Start::Zeta,
            (Variant::Classical, Branch::P2Zero | Branch::P2Right | Branch::P4Left) => Start::Cos,
            (Variant::Classical, Branch::P2Left | Branch::P4Right) => Start::Sin,
            (Variant::Impulsive, Branch::P2Zero | Branch::P2Left | Branch::P4Right) => Start::Cos,
            (Variant::Impulsive, Branch::P2Right | Branch::P4Left) => Start::Sin,
        }
    }

    /// Damped branches: the minus root tends to the cosine start as `c → 0`
    /// and follows the right edge; the plus root follows the left edge.
    pub fn zeta_root(self) -> ZetaRoot {
        match self {
            Branch::P2Left | Branch::P4Left => ZetaRoot::Plus,
            _ => ZetaRoot::Minus,
        }
    }

    pub fn spec(self, variant: Variant, order: usize, damping: f64) -> ProblemSpec {
        match variant {
            Variant::Damped => ProblemSpec {
                zeta0_root: self.zeta_root(),
                field_mode: FieldMode::Complex,
                ..ProblemSpec::damped(self.lambda1(), damping, order)
            },
            v => ProblemSpec::new(v, self.lambda1(), self.start(v), order),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| Error::InvalidProblem(format!("unknown branch '{s}'")))
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Variant::Classical),
            "damped" => Ok(Variant::Damped),
            "impulsive" => Ok(Variant::Impulsive),
            _ => Err(Error::InvalidProblem(format!("unknown variant '{s}'"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Classical => "classical",
            Variant::Damped => "damped",
            Variant::Impulsive => "impulsive",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_mismatched_start() {
        let mut s = ProblemSpec::classical(2, Start::Cos, 3);
        assert!(s.validate().is_ok());
        s.start = Start::Zeta;
        assert!(s.validate().is_err());
        let mut d = ProblemSpec::damped(1, 0.1, 4);
        assert!(d.validate().is_ok());
        d.start = Start::Cos;
        assert!(d.validate().is_err());
        assert!(ProblemSpec::classical(3, Start::Cos, 3).validate().is_err());
        assert!(ProblemSpec::classical(1, Start::Cos, 0).validate().is_err());
    }

    #[test]
    fn branch_ids_round_trip() {
        for b in Branch::ALL {
            assert_eq!(b.id().parse::<Branch>().unwrap(), b);
        }
        assert!("p3-left".parse::<Branch>().is_err());
    }
}
