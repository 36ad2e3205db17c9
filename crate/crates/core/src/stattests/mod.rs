//! Unit-root, causality, residual and stability tests.

mod adf;
mod granger;
mod report;
mod residual;
mod stability;

pub use adf::{adf_test, adf_test_fixed, default_max_lag, AdfResult, AdfTerms, CriticalValues, LagSelection};
pub use granger::{granger_matrix, granger_test, Dof, GrangerMatrix, GrangerResult};
pub use report::{adf_all, residual_diagnostics, DiagnosticsReport, ResidualDiagnostics};
pub use residual::{durbin_watson, jarque_bera, system_normality, NormalityResult, SystemNormalityResult};
pub use stability::{companion_matrix, stability_check, stability_from_lags, StabilityResult, UNIT_CIRCLE_TOLERANCE};
