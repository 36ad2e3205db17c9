//! Aggregated diagnostics for a frame and a fitted model.

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adf::{adf_test, AdfResult, AdfTerms};
use super::granger::GrangerMatrix;
use super::residual::{durbin_watson, jarque_bera, system_normality, NormalityResult, SystemNormalityResult};
use super::stability::{stability_check, StabilityResult};
use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;
use crate::var::FittedVar;

/// ADF on every column, in column order.
pub fn adf_all(frame: &TimeSeriesFrame, max_lag: Option<usize>, terms: AdfTerms) -> Result<IndexMap<String, AdfResult>> {
    let results = (0..frame.n_vars())
        .into_par_iter()
        .map(|j| adf_test(frame.values().column(j).as_slice(), max_lag, terms))
        .collect::<Result<Vec<_>>>()?;
    Ok(frame.columns().iter().cloned().zip(results).collect())
}

/// Per-equation residual checks plus joint normality and stability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub durbin_watson: IndexMap<String, f64>,
    pub jarque_bera: IndexMap<String, NormalityResult>,
    /// `None` when the residual covariance is singular.
    pub system_normality: Option<SystemNormalityResult>,
    pub stability: StabilityResult,
}

pub fn residual_diagnostics(model: &FittedVar) -> Result<ResidualDiagnostics> {
    if model.residuals.nrows() == 0 {
        return Err(Error::InvalidArgument("model carries no residuals".into()));
    }
    let mut dw = IndexMap::new();
    let mut jb = IndexMap::new();
    for (name, col) in model.columns.iter().zip(model.residuals.column_iter()) {
        let e: Vec<f64> = col.iter().copied().collect();
        dw.insert(name.clone(), durbin_watson(&e)?);
        jb.insert(name.clone(), jarque_bera(&e)?);
    }
    let system = match system_normality(&model.residuals) {
        Ok(r) => Some(r),
        Err(Error::NotPositiveDefinite) => None,
        Err(e) => return Err(e),
    };
    Ok(ResidualDiagnostics {
        durbin_watson: dw,
        jarque_bera: jb,
        system_normality: system,
        stability: stability_check(model)?,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub adf: IndexMap<String, AdfResult>,
    pub granger: Option<GrangerMatrix>,
    pub residuals: Option<ResidualDiagnostics>,
}

impl DiagnosticsReport {
    /// Columns whose unit root is not rejected at 5%.
    pub fn non_stationary_columns(&self) -> Vec<&str> {
        self.adf.iter().filter(|(_, r)| !r.is_stationary()).map(|(c, _)| c.as_str()).collect()
    }

    /// Human-readable findings that do not stop an analysis.
    pub fn warnings(&self, alpha: f64) -> Vec<String> {
        let mut out = Vec::new();
        let ns = self.non_stationary_columns();
        if !ns.is_empty() {
            out.push(format!("unit root not rejected at 5% for: {}", ns.join(", ")));
        }
        if let Some(r) = &self.residuals {
            let rejected: Vec<&str> =
                r.jarque_bera.iter().filter(|(_, n)| n.rejects_at(alpha)).map(|(c, _)| c.as_str()).collect();
            if !rejected.is_empty() {
                out.push(format!("residual normality rejected for: {}", rejected.join(", ")));
            }
            if let Some(s) = &r.system_normality {
                if s.p_value < alpha {
                    out.push(format!("joint residual normality rejected (statistic {:.4}, dof {})", s.statistic, s.dof));
                }
            }
            if !r.stability.is_stable {
                out.push(format!(
                    "fitted model is not stable (max companion eigenvalue modulus {:.6})",
                    r.stability.max_eigenvalue_modulus
                ));
            }
        }
        out
    }
}
