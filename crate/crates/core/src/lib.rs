//! TimeBridge: a patch-attention forecaster that detrends patches for
//! intra-series attention and keeps raw levels for cross-series attention,
//! together with the unit-root, cointegration and backtesting tools used to
//! study it.

pub mod ablation;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod stats;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
