//! Hourly multivariate time-series analysis.
//!
//! Loading and aligning raw CSV sources, gap imputation, stationarity and
//! causality tests, VAR(p) estimation and forecasting, residual diagnostics
//! and forecast-error variance decomposition.

pub mod error;
pub mod fevd;
pub mod frame;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod stattests;
pub mod transform;
pub mod var;

pub use error::{Error, Result};
pub use frame::TimeSeriesFrame;
