//! Augmented Dickey-Fuller unit-root test.
//!
//! The regression is run in difference form,
//!
//! ```text
//! Δy_t = c + b·t + γ·y_{t-1} + Σ_{i=1..p} φ_i·Δy_{t-i} + e_t
//! ```
//!
//! which is the level form with `γ = α - 1`; the statistic is `γ̂ / se(γ̂)`.
//! The augmentation order `p` is chosen by AIC over `0..=max_lag`, with every
//! candidate fitted on the common sample the largest order allows, then the
//! chosen order is refitted on all available observations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares_vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfTerms {
    Constant,
    ConstantTrend,
}

impl AdfTerms {
    fn deterministic_count(self) -> usize {
        match self {
            Self::Constant => 1,
            Self::ConstantTrend => 2,
        }
    }

    /// Large-sample Dickey-Fuller critical values at 1%, 5% and 10%.
    pub fn critical_values(self) -> CriticalValues {
        match self {
            Self::Constant => CriticalValues { one: -3.43, five: -2.862, ten: -2.567 },
            Self::ConstantTrend => CriticalValues { one: -3.96, five: -3.41, ten: -3.12 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    #[serde(rename = "1%")]
    pub one: f64,
    #[serde(rename = "5%")]
    pub five: f64,
    #[serde(rename = "10%")]
    pub ten: f64,
}

impl CriticalValues {
    /// Approximate p-value: `ln p` interpolated linearly between the three
    /// tabulated points, extrapolated with the nearest segment's slope, and
    /// clamped to `[0.001, 0.999]`.
    pub fn approx_p_value(&self, statistic: f64) -> f64 {
        let knots = [(self.one, 0.01f64.ln()), (self.five, 0.05f64.ln()), (self.ten, 0.10f64.ln())];
        let seg = if statistic <= self.five { (knots[0], knots[1]) } else { (knots[1], knots[2]) };
        let ((x0, y0), (x1, y1)) = seg;
        let log_p = y0 + (statistic - x0) * (y1 - y0) / (x1 - x0);
        log_p.exp().clamp(0.001, 0.999)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSelection {
    Aic,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub approx_p_value: f64,
    pub critical_values: CriticalValues,
    pub lag_used: usize,
    pub max_lag: usize,
    pub lag_selection: LagSelection,
    pub regression_terms: AdfTerms,
    pub nobs: usize,
}

impl AdfResult {
    /// True when the unit root is rejected at 5%.
    pub fn is_stationary(&self) -> bool {
        self.statistic < self.critical_values.five
    }
}

/// `floor(12 * (T/100)^(1/4))`.
pub fn default_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

struct AdfFit {
    statistic: f64,
    aic: f64,
    nobs: usize,
}

/// Regression with `lag` augmentation terms on the sample starting at
/// `first`, the index of the first Δy used as the dependent variable.
fn adf_regression(y: &[f64], lag: usize, first: usize, terms: AdfTerms) -> Result<AdfFit> {
    let n = y.len();
    let nobs = n - first;
    let det = terms.deterministic_count();
    let m = det + 1 + lag;
    if nobs <= m {
        return Err(Error::InsufficientLength { required: first + m, actual: n });
    }
    let dy = |t: usize| y[t] - y[t - 1];
    let x = DMatrix::from_fn(nobs, m, |r, c| {
        let t = first + r;
        match c {
            0 => 1.0,
            1 if terms == AdfTerms::ConstantTrend => (r + 1) as f64,
            c if c == det => y[t - 1],
            c => dy(t - (c - det)),
        }
    });
    let target = DVector::from_fn(nobs, |r, _| dy(first + r));
    let ls = least_squares_vec(&x, &target)?;
    let ssr = ls.ssr()[0];
    let s2 = ssr / (nobs - m) as f64;
    let se = (s2 * ls.inverse_gram_diagonal()[det]).sqrt();
    let gamma = ls.coefficients[(det, 0)];
    let aic = nobs as f64 * (ssr / nobs as f64).ln() + 2.0 * m as f64;
    Ok(AdfFit { statistic: gamma / se, aic, nobs })
}

fn validate(series: &[f64], max_lag: usize) -> Result<()> {
    if series.len() <= max_lag + 2 {
        return Err(Error::InsufficientLength { required: max_lag + 2, actual: series.len() });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series".into()));
    }
    if series.iter().all(|v| *v == series[0]) {
        return Err(Error::ConstantSeries);
    }
    Ok(())
}

/// ADF test with AIC lag selection over `0..=max_lag`. `None` uses
/// [`default_max_lag`], capped so the largest regression stays identified.
pub fn adf_test(series: &[f64], max_lag: Option<usize>, terms: AdfTerms) -> Result<AdfResult> {
    let n = series.len();
    let det = terms.deterministic_count();
    let max_lag = match max_lag {
        Some(l) => l,
        None => default_max_lag(n).min((n / 2).saturating_sub(det + 1)),
    };
    validate(series, max_lag)?;
    let first = max_lag + 1;
    let mut best: Option<(usize, f64)> = None;
    for lag in 0..=max_lag {
        let fit = adf_regression(series, lag, first, terms)?;
        if best.is_none_or(|(_, aic)| fit.aic < aic) {
            best = Some((lag, fit.aic));
        }
    }
    let lag_used = best.map(|(l, _)| l).unwrap_or(0);
    let fit = adf_regression(series, lag_used, lag_used + 1, terms)?;
    let critical_values = terms.critical_values();
    Ok(AdfResult {
        statistic: fit.statistic,
        approx_p_value: critical_values.approx_p_value(fit.statistic),
        critical_values,
        lag_used,
        max_lag,
        lag_selection: LagSelection::Aic,
        regression_terms: terms,
        nobs: fit.nobs,
    })
}

/// ADF test with a fixed augmentation order.
pub fn adf_test_fixed(series: &[f64], lag: usize, terms: AdfTerms) -> Result<AdfResult> {
    validate(series, lag)?;
    let fit = adf_regression(series, lag, lag + 1, terms)?;
    let critical_values = terms.critical_values();
    Ok(AdfResult {
        statistic: fit.statistic,
        approx_p_value: critical_values.approx_p_value(fit.statistic),
        critical_values,
        lag_used: lag,
        max_lag: lag,
        lag_selection: LagSelection::Fixed,
        regression_terms: terms,
        nobs: fit.nobs,
    })
}
