//! Experiment driver for `hsb-core`: configuration, the verification suites and
//! report emission.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ExperimentId};
pub use error::CliError;
pub use experiments::run;
pub use report::{Case, CaseKind, Report};
