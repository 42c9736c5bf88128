//! Sub-sequential physics-informed training with a selective state-space
//! encoder.
//!
//! The crate trains a neural PDE solver on the classic failure-mode
//! benchmarks (convection, reaction, wave) by feeding each collocation point
//! to the network as a short temporal sub-sequence, encoding it with a
//! selective (time-varying) state-space layer, and aligning the overlapping
//! predictions of neighbouring sub-sequences. Everything — second-order
//! automatic differentiation, ZOH discretization, the L-BFGS optimizer —
//! is built in-crate on `f64`, single-threaded and deterministic.
//!
//! Module map:
//! - [`autodiff`]: forward jets over (x, t) and a reverse-mode tape over
//!   parameters.
//! - [`ssm`]: continuous-to-discrete state-space machinery and its
//!   closed-form oracles.
//! - [`collocation`]: grids, interior/initial/boundary sets, sub-sequences.
//! - [`physics`]: the PDE benchmarks, analytical solutions, loss assembly.
//! - [`model`]: the encoder, the MLP baseline, checkpoints, and the fast
//!   hand-derived backward pass used by training.
//! - [`optimize`]: L-BFGS with strong Wolfe line search and the training
//!   loop.
//! - [`eval`]: metrics, grid export, reference loading, ablation sweeps.
//! - [`oracles`]: self-check suites runnable from the CLI.
//! - [`cli`]: config files and the `train/eval/ablate/gradcheck/oracle`
//!   subcommands.

pub mod autodiff;
pub mod cli;
pub mod collocation;
pub mod error;
pub mod eval;
pub mod model;
pub mod optimize;
pub mod oracles;
pub mod physics;
pub mod ssm;

pub use error::{Error, Result};
