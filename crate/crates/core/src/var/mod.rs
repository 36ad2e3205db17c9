//! Vector autoregression: estimation, forecasting and grid search.
//!
//! Each of the `K` equations regresses `y_t` on deterministic terms and `p`
//! lags of every variable, in levels:
//!
//! ```text
//! y_t = D·d_t + A_1·y_{t-1} + ... + A_p·y_{t-p} + e_t
//! ```
//!
//! All equations share one design matrix, so equation-wise least squares is
//! the multivariate least-squares solution.

mod grid;
mod model;

pub use grid::{grid_search, grid_search_differenced, GridCell, GridKey, GridSearchReport};
pub use model::{
    build_design, fit, forecast, forecast_and_evaluate, Design, FittedVar, ForecastResult, ModelFile, TrendSpec,
};
