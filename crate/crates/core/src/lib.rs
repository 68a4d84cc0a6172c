pub mod error;
pub mod floquet;
pub mod galerkin;
pub mod ham;
pub mod jet;
pub mod problem;
pub mod scalar;
pub mod solver;
pub mod signal;

pub use error::{Error, Result};
pub use problem::{Branch, FieldMode, ProblemSpec, Start, UnknownVector, Variant, ZetaRoot};
pub use scalar::Scalar;
pub use signal::{Freq, Kind, Signal, SignalError};
