//! Monte Carlo laboratory for the efficient-crashes bubble model and the
//! crash-aware Kelly strategy.
//!
//! * [`model`] generates synthetic price paths with mispricing-proportional
//!   corrections.
//! * [`kelly`] computes optimal risky fractions.
//! * [`strategy`] turns a path into wealth series for the benchmark suite.
//! * [`metrics`] reduces ensembles of wealth series to performance metrics.
//! * [`experiment`] runs whole experiment families with quantile aggregation.
//! * [`io`] handles configuration and result files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod io;
pub mod kelly;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod strategy;

pub use error::{EcmError, Result};
pub use model::{ModelParams, PricePath};
