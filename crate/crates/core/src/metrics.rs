//! Forecast accuracy metrics.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

impl Metrics {
    pub fn from_errors(errors: impl IntoIterator<Item = f64>) -> Self {
        let (mut abs, mut sq, mut n) = (0.0, 0.0, 0usize);
        for e in errors {
            abs += e.abs();
            sq += e * e;
            n += 1;
        }
        let n = n.max(1) as f64;
        let mse = sq / n;
        Self { mae: abs / n, mse, rmse: mse.sqrt() }
    }
}

/// Per-variable metrics plus their unweighted means. Each averaged metric is
/// the mean of the per-variable values, so `average.rmse` is generally not
/// `sqrt(average.mse)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_variable: IndexMap<String, Metrics>,
    pub average: Metrics,
}

impl MetricsReport {
    pub fn from_per_variable(per_variable: IndexMap<String, Metrics>) -> Self {
        let k = per_variable.len().max(1) as f64;
        let mean = |f: fn(&Metrics) -> f64| per_variable.values().map(f).sum::<f64>() / k;
        let average = Metrics { mae: mean(|m| m.mae), mse: mean(|m| m.mse), rmse: mean(|m| m.rmse) };
        Self { per_variable, average }
    }
}

pub fn evaluate(actual: &TimeSeriesFrame, predicted: &TimeSeriesFrame) -> Result<MetricsReport> {
    if actual.columns() != predicted.columns() {
        return Err(Error::ShapeMismatch("column names differ".into()));
    }
    if actual.index() != predicted.index() {
        return Err(Error::ShapeMismatch(format!(
            "index differs ({} vs {} rows)",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::ShapeMismatch("no rows to evaluate".into()));
    }
    actual.ensure_finite()?;
    predicted.ensure_finite()?;
    let diff = predicted.values() - actual.values();
    let per_variable = actual
        .columns()
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), Metrics::from_errors(diff.column(j).iter().copied())))
        .collect();
    Ok(MetricsReport::from_per_variable(per_variable))
}
