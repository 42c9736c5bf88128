//! Exact derivatives for residual losses: forward second-order jets over the
//! (x, t) inputs, reverse accumulation over parameters.
//!
//! Everything runs in 64-bit floats; second derivatives and line searches
//! are too noise-sensitive for anything less.

mod jet;
mod scalar;
mod tape;

pub use jet::{Jet, Jet1, Jet2};
pub use scalar::Scalar;
pub use tape::{finite_diff_check, param_grad, GradMap, ParamFn, Tape, Var};
