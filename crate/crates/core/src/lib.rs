//! Message-matrix random dropping for message-passing GNNs.
//!
//! Every graph random-dropping method (Dropout, DropEdge, DropNode and
//! DropMessage) is realized here as a Bernoulli mask over one explicit
//! message matrix `M` (one row per directed edge). On top of that engine the
//! crate carries a small dense reverse-mode autodiff tape, GCN and APPNP
//! backbones with an Adam training loop, and the numerical checks for the
//! variance, regularization, diversity, entropy and over-smoothing analyses.
//!
//! The crate is `no_std` (with `alloc`); file formats, the CLI and parallel
//! experiment orchestration live in the `droplab` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod drop;
mod error;
pub mod graph;
pub mod models;
pub mod optim;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{Graph, Split};
pub use tensor::Tensor;
