//! Minimum cost multicut (correlation clustering) posed as a conditional random
//! field with pattern-based potentials over 3-cliques of edge variables.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - [`graph`]: graphs, chordless cycles, feasibility and the labeling/partition
//!   correspondence.
//! - [`objective`]: the linear multicut cost, the cubic penalty objective and the
//!   probability-to-cost transform.
//! - [`crf`]: CRF energy, pattern potential table and unrolled mean-field inference.
//! - [`learn`]: reverse-mode gradients through the unrolled inference and a small
//!   feature-to-unary network, plus staged training.
//! - [`solvers`]: exact enumeration, greedy additive edge contraction, local search
//!   and rounding of marginals back to a decomposition.
//! - [`data`]: planted-partition generation, edge features and clustering metrics.
//!
//! File formats, reports and the command line live in the `mccrf` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod crf;
pub mod data;
mod error;
pub mod graph;
pub mod learn;
mod math;
pub mod objective;
pub mod solvers;

pub use error::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;
