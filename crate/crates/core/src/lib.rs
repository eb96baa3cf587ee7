//! Fairness-constrained classification for binary and multi-class targets.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the whole numerical
//! pipeline:
//!
//! - [`data`]: datasets with a sensitive attribute, seeded k-fold plans and a
//!   synthetic biased-data generator,
//! - [`constraints`]: linear moment constraints for demographic parity,
//!   equalized odds and their combination,
//! - [`learners`]: the cost-sensitive oracle (weighted multinomial logistic
//!   regression),
//! - [`geg`]: the generalized exponentiated gradient saddle-point solver that
//!   returns a randomized classifier,
//! - [`metrics`]: effectiveness/fairness metrics, Pareto counting, the
//!   Wilcoxon signed-rank test and Holm's step-down correction.
//!
//! File formats, the experiment harness and the command line live in the
//! `geg-cli` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod constraints;
pub mod data;
mod error;
pub mod geg;
pub mod learners;
mod matrix;
pub mod metrics;

pub use error::{Error, Result};
pub use matrix::Matrix;
