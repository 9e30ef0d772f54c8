//! Session-based recommendation with target-attentive gated graph neural
//! networks.
//!
//! The crate covers the whole path from raw click logs to ranked
//! recommendations:
//!
//! - [`data`]: click-log parsing, session filtering, time split, prefix
//!   expansion and batching,
//! - [`graph`]: per-session directed graphs with normalized adjacency,
//! - [`autodiff`], [`optim`], [`gradcheck`]: a small tensor tape with Adam
//!   and a finite-difference checker,
//! - [`model`]: gated propagation, target and global attention, scoring,
//! - [`train`], [`checkpoint`], [`eval`]: training loop, persistence and
//!   Precision@k / MRR@k,
//! - [`cli`]: the `tagnn` command-line front end.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
