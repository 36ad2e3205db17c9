use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{format_timestamp, parse_timestamp, TimeSeriesFrame};
use crate::linalg::least_squares;
use crate::metrics::{evaluate, MetricsReport};

/// Deterministic regressors. The declaration order is the tie-break order
/// used by grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrendSpec {
    #[serde(rename = "n")]
    None,
    #[serde(rename = "c")]
    Constant,
    #[serde(rename = "ct")]
    ConstantLinear,
    #[serde(rename = "ctt")]
    ConstantQuadratic,
}

impl TrendSpec {
    pub const ALL: [TrendSpec; 4] = [Self::Constant, Self::ConstantLinear, Self::ConstantQuadratic, Self::None];

    pub fn code(self) -> &'static str {
        match self {
            Self::None => "n",
            Self::Constant => "c",
            Self::ConstantLinear => "ct",
            Self::ConstantQuadratic => "ctt",
        }
    }

    pub fn n_terms(self) -> usize {
        match self {
            Self::None => 0,
            Self::Constant => 1,
            Self::ConstantLinear => 2,
            Self::ConstantQuadratic => 3,
        }
    }

    /// Deterministic regressor values at trend index `tau` (1 for the first
    /// fitted row).
    pub fn terms(self, tau: f64) -> impl Iterator<Item = f64> {
        [1.0, tau, tau * tau].into_iter().take(self.n_terms())
    }
}

impl fmt::Display for TrendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TrendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "n" => Ok(Self::None),
            "c" => Ok(Self::Constant),
            "ct" => Ok(Self::ConstantLinear),
            "ctt" => Ok(Self::ConstantQuadratic),
            other => Err(Error::InvalidArgument(format!("unknown trend code `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// `(T-p) x (m + K·p)`: deterministic terms, then lag 1 block, lag 2 block, ...
    pub regressors: DMatrix<f64>,
    /// `(T-p) x K`
    pub targets: DMatrix<f64>,
}

pub fn build_design(frame: &TimeSeriesFrame, p: usize, trend: TrendSpec) -> Result<Design> {
    if p == 0 {
        return Err(Error::InvalidArgument("lag order must be at least 1".into()));
    }
    let (t, k) = (frame.len(), frame.n_vars());
    let m = trend.n_terms();
    let width = m + k * p;
    if t <= width || t <= p {
        return Err(Error::InsufficientObservations { observations: t.saturating_sub(p), regressors: width });
    }
    frame.ensure_finite()?;
    let y = frame.values();
    let rows = t - p;
    let mut regressors = DMatrix::zeros(rows, width);
    for r in 0..rows {
        for (c, v) in trend.terms((r + 1) as f64).enumerate() {
            regressors[(r, c)] = v;
        }
        for lag in 1..=p {
            for j in 0..k {
                regressors[(r, m + (lag - 1) * k + j)] = y[(p + r - lag, j)];
            }
        }
    }
    let targets = y.rows(p, rows).into_owned();
    Ok(Design { regressors, targets })
}

/// A VAR(p) estimated by equation-wise least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct FittedVar {
    pub p: usize,
    pub trend: TrendSpec,
    pub columns: Vec<String>,
    /// `lag_matrices[i][(eq, var)]`: effect of `var` at lag `i+1` on `eq`.
    pub lag_matrices: Vec<DMatrix<f64>>,
    /// `K x m`
    pub trend_coeffs: DMatrix<f64>,
    /// `(T-p) x K`. Empty for models loaded from a model file.
    pub residuals: DMatrix<f64>,
    /// Degrees-of-freedom corrected residual covariance.
    pub sigma_u: DMatrix<f64>,
    /// Last `p` training rows, oldest first.
    pub train_tail: DMatrix<f64>,
    pub last_timestamp: NaiveDateTime,
    /// Trend index of the first fitted observation.
    pub t_offset: usize,
    /// Number of fitted observations.
    pub nobs: usize,
}

impl FittedVar {
    pub fn k(&self) -> usize {
        self.columns.len()
    }

    /// Regressor count per equation.
    pub fn n_params(&self) -> usize {
        self.trend.n_terms() + self.k() * self.p
    }

    /// Stacked `(m + K·p) x K` coefficient matrix in design-column order.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let (k, m) = (self.k(), self.trend.n_terms());
        let mut b = DMatrix::zeros(self.n_params(), k);
        for eq in 0..k {
            for d in 0..m {
                b[(d, eq)] = self.trend_coeffs[(eq, d)];
            }
            for (i, a) in self.lag_matrices.iter().enumerate() {
                for j in 0..k {
                    b[(m + i * k + j, eq)] = a[(eq, j)];
                }
            }
        }
        b
    }

    pub fn residual_frame(&self, index: Vec<NaiveDateTime>) -> Result<TimeSeriesFrame> {
        TimeSeriesFrame::new(index, self.columns.clone(), self.residuals.clone())
    }
}

pub fn fit(frame: &TimeSeriesFrame, p: usize, trend: TrendSpec) -> Result<FittedVar> {
    let design = build_design(frame, p, trend)?;
    let (rows, width) = design.regressors.shape();
    if rows <= width {
        return Err(Error::InsufficientObservations { observations: rows, regressors: width });
    }
    let ls = least_squares(&design.regressors, &design.targets)?;
    let k = frame.n_vars();
    let m = trend.n_terms();
    let b = &ls.coefficients;
    let lag_matrices = (0..p)
        .map(|i| DMatrix::from_fn(k, k, |eq, j| b[(m + i * k + j, eq)]))
        .collect();
    let trend_coeffs = DMatrix::from_fn(k, m, |eq, d| b[(d, eq)]);
    let sigma = ls.residuals.transpose() * &ls.residuals / (rows - width) as f64;
    let sigma_u = (&sigma + sigma.transpose()) * 0.5;
    Ok(FittedVar {
        p,
        trend,
        columns: frame.columns().to_vec(),
        lag_matrices,
        trend_coeffs,
        residuals: ls.residuals,
        sigma_u,
        train_tail: frame.values().rows(frame.len() - p, p).into_owned(),
        last_timestamp: frame.last_timestamp().expect("non-empty frame"),
        t_offset: 1,
        nobs: rows,
    })
}

/// Iterated plug-in forecast for `steps` hours after the training data.
pub fn forecast(model: &FittedVar, steps: usize) -> Result<TimeSeriesFrame> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let (k, p) = (model.k(), model.p);
    // history rows: oldest first; the newest is at the end
    let mut history: Vec<DVector<f64>> = (0..p).map(|i| model.train_tail.row(i).transpose()).collect();
    let mut out = DMatrix::zeros(steps, k);
    for h in 0..steps {
        let tau = (model.t_offset + model.nobs + h) as f64;
        let det = DVector::from_iterator(model.trend.n_terms(), model.trend.terms(tau));
        let mut y = &model.trend_coeffs * det;
        for (i, a) in model.lag_matrices.iter().enumerate() {
            y += a * &history[history.len() - 1 - i];
        }
        out.row_mut(h).copy_from(&y.transpose());
        history.push(y);
    }
    let start = model.last_timestamp + chrono::Duration::hours(1);
    TimeSeriesFrame::hourly(start, model.columns.clone(), out)
}

/// Point forecasts over a held-out frame and their accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub forecast: TimeSeriesFrame,
    pub metrics: MetricsReport,
}

pub fn forecast_and_evaluate(model: &FittedVar, actual: &TimeSeriesFrame) -> Result<ForecastResult> {
    let forecast = forecast(model, actual.len())?;
    let metrics = evaluate(actual, &forecast)?;
    Ok(ForecastResult { forecast, metrics })
}

/// On-disk model layout: matrices as row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub k: usize,
    pub p: usize,
    pub trend: TrendSpec,
    pub columns: Vec<String>,
    pub lag_matrices: Vec<Vec<Vec<f64>>>,
    pub trend_coeffs: Vec<Vec<f64>>,
    pub sigma_u: Vec<Vec<f64>>,
    pub train_tail: Vec<Vec<f64>>,
    pub last_timestamp: String,
    pub t_offset: usize,
    pub nobs: usize,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidArgument(format!("`{what}` must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl From<FittedVar> for ModelFile {
    fn from(m: FittedVar) -> Self {
        Self {
            k: m.k(),
            p: m.p,
            trend: m.trend,
            lag_matrices: m.lag_matrices.iter().map(to_rows).collect(),
            trend_coeffs: to_rows(&m.trend_coeffs),
            sigma_u: to_rows(&m.sigma_u),
            train_tail: to_rows(&m.train_tail),
            last_timestamp: format_timestamp(&m.last_timestamp),
            t_offset: m.t_offset,
            nobs: m.nobs,
            columns: m.columns,
        }
    }
}

impl TryFrom<ModelFile> for FittedVar {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let k = f.k;
        if f.columns.len() != k || f.p == 0 || f.lag_matrices.len() != f.p {
            return Err(Error::InvalidArgument("model dimensions are inconsistent".into()));
        }
        let lag_matrices = f
            .lag_matrices
            .iter()
            .map(|a| from_rows(a, k, k, "lag_matrices"))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p: f.p,
            trend: f.trend,
            lag_matrices,
            trend_coeffs: from_rows(&f.trend_coeffs, k, f.trend.n_terms(), "trend_coeffs")?,
            residuals: DMatrix::zeros(0, k),
            sigma_u: from_rows(&f.sigma_u, k, k, "sigma_u")?,
            train_tail: from_rows(&f.train_tail, f.p, k, "train_tail")?,
            last_timestamp: parse_timestamp(&f.last_timestamp)
                .ok_or_else(|| Error::InvalidArgument(format!("bad timestamp `{}`", f.last_timestamp)))?,
            t_offset: f.t_offset,
            nobs: f.nobs,
            columns: f.columns,
        })
    }
}
