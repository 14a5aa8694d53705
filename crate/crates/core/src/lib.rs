//! Dual-graph embedded feedforward networks for omics classification.
//!
//! The crate is organised bottom-up:
//!
//! * [`nn`] is a small deterministic training engine (masked and dense layers,
//!   dropout, softmax cross-entropy, Adam, early stopping).
//! * [`graph`] holds feature graphs, self-loop masks, Barabási-Albert
//!   generation and closeness centrality.
//! * [`tree`] fits gradient-boosted trees and random forests from scratch and
//!   turns fitted trees into directed feature graphs.
//! * [`model`] composes the two-branch network, its single-branch ablations and
//!   connection-weight feature importance.
//! * [`simgen`] generates the synthetic scale-free benchmark.
//! * [`metrics`] has classification, ranking and hypothesis-test metrics.

pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod seed;
pub mod simgen;
pub mod tree;

pub use error::{Error, Result};
