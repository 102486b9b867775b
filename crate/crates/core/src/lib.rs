//! Connection calculus for Hermitian metrics on a single holomorphic chart.

// Index loops mirror the tensor notation; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod comparison;
pub mod connections;
pub mod curvature;
pub mod error;
pub mod geodesy;
pub mod linalg;
pub mod models;
pub mod numerics;
pub mod sampling;
pub mod selftest;
pub mod variational;

pub use chart::{ChartPoint, MetricModel, TangentVector};
pub use connections::Flavor;
pub use error::{Error, Result};
pub use models::{model_from_str, ModelSpec};
