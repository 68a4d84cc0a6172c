use crate::signal::SignalError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("jet slot at order {order} is already fixed")]
    SlotAlreadyFixed { order: usize },
    #[error("secular system at order {order} is singular")]
    SingularSecularSystem { order: usize },
    #[error("zeta0 discriminant {discriminant} is negative in real mode")]
    ComplexRootInRealMode { discriminant: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("Newton did not converge in {iterations} iterations (residual {residual_norm:e})")]
    NoConvergence { iterations: usize, residual_norm: f64 },
    #[error("converged delta {delta} lies outside the window [{lo}, {hi}]")]
    OutsideWindow { delta: f64, lo: f64, hi: f64 },
    #[error("Jacobian is singular")]
    SingularJacobian,
    #[error("branch lost at epsilon {last_good_epsilon} (step floor {step_floor})")]
    BranchLost { last_good_epsilon: f64, step_floor: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
