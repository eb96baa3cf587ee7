//! Batch tooling around `geg-core`: CSV ingestion, cross-validated
//! benchmarks, and Pareto / significance reports.

pub mod app;
pub mod csv_io;
pub mod error;
pub mod experiment;
pub mod report;

pub use error::{CliError, CliResult};
