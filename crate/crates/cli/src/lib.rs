//! Experiment harness for the dual-graph classifier: data ingestion,
//! configuration, stratified replications, model roster and report files.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod report;
pub mod split;

pub use error::{HarnessError, Result};
