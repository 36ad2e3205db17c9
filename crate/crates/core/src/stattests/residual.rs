//! Serial-correlation and normality checks on residuals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// `d = Σ_{t≥2} (e_t - e_{t-1})² / Σ_t e_t²`, always within `[0, 4]`.
pub fn durbin_watson(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::InsufficientLength { required: 1, actual: residuals.len() });
    }
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(Error::ZeroResiduals);
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub jb_statistic: f64,
    pub p_value: f64,
    pub skewness: f64,
    /// Raw fourth standardized moment minus three.
    pub excess_kurtosis: f64,
    pub n: usize,
}

impl NormalityResult {
    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Population skewness and raw kurtosis (fourth standardized moment).
fn moments(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in sample {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let scale = sample.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m2 <= (1e-14 * scale).powi(2) {
        return Err(Error::ZeroVariance);
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

/// Jarque-Bera: `JB = n/6 · (s² + (k - 3)²/4)`, chi-squared(2) under normality.
pub fn jarque_bera(residuals: &[f64]) -> Result<NormalityResult> {
    if residuals.len() < 4 {
        return Err(Error::InsufficientLength { required: 3, actual: residuals.len() });
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residuals".into()));
    }
    let (skewness, kurtosis) = moments(residuals)?;
    let n = residuals.len();
    let jb_statistic = n as f64 / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0);
    let p_value = chi2(2)?.sf(jb_statistic);
    Ok(NormalityResult { jb_statistic, p_value, skewness, excess_kurtosis: kurtosis - 3.0, n })
}

fn chi2(dof: usize) -> Result<ChiSquared> {
    ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Joint normality of a `T x K` residual matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemNormalityResult {
    pub statistic: f64,
    pub skewness_component: f64,
    pub kurtosis_component: f64,
    pub dof: usize,
    pub critical_value_5pct: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Residuals are centred and whitened with the inverse Cholesky factor of
/// their ML covariance; the per-component skewness and kurtosis terms are
/// summed, giving chi-squared(2K) under joint normality.
pub fn system_normality(residuals: &DMatrix<f64>) -> Result<SystemNormalityResult> {
    let (n, k) = residuals.shape();
    if n < 4 {
        return Err(Error::InsufficientLength { required: 3, actual: n });
    }
    let mut centred = residuals.clone();
    for mut col in centred.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let cov = centred.transpose() * &centred / n as f64;
    let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite)?;
    // rows of `white` are whitened observations: L^-1 u_t
    let white = chol
        .l()
        .solve_lower_triangular(&centred.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let (mut skew_term, mut kurt_term) = (0.0, 0.0);
    for row in white.row_iter() {
        let b1 = row.iter().map(|w| w.powi(3)).sum::<f64>() / n as f64;
        let b2 = row.iter().map(|w| w.powi(4)).sum::<f64>() / n as f64 - 3.0;
        skew_term += n as f64 * b1 * b1 / 6.0;
        kurt_term += n as f64 * b2 * b2 / 24.0;
    }
    let statistic = skew_term + kurt_term;
    let dist = chi2(2 * k)?;
    Ok(SystemNormalityResult {
        statistic,
        skewness_component: skew_term,
        kurtosis_component: kurt_term,
        dof: 2 * k,
        critical_value_5pct: dist.inverse_cdf(0.95),
        p_value: dist.sf(statistic),
        n,
    })
}
