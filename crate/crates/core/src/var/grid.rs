//! Lag-order x trend selection by out-of-sample RMSE.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{fit, forecast, TrendSpec};
use crate::error::{Error, Result};
use crate::frame::{format_value, TimeSeriesFrame};
use crate::metrics::evaluate;
use crate::transform::{difference, invert_difference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridKey {
    pub p: usize,
    pub trend: TrendSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub p: usize,
    pub trend: TrendSpec,
    /// Average RMSE over variables on the validation frame.
    pub rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    /// Sorted by lag order, then trend.
    pub cells: Vec<GridCell>,
    pub best: GridKey,
    pub best_rmse: f64,
    pub metric: String,
    pub validation_rows: usize,
}

impl GridSearchReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["p", "trend", "rmse"])?;
        for c in &self.cells {
            w.write_record([c.p.to_string(), c.trend.to_string(), c.rmse.map(format_value).unwrap_or_default()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn cell(&self, p: usize, trend: TrendSpec) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.p == p && c.trend == trend)
    }
}

fn check_adjacent(train: &TimeSeriesFrame, validation: &TimeSeriesFrame) -> Result<()> {
    if validation.is_empty() {
        return Err(Error::InvalidArgument("validation frame is empty".into()));
    }
    if train.columns() != validation.columns() {
        return Err(Error::ShapeMismatch("train and validation columns differ".into()));
    }
    let expected = train.continuation_index(validation.len());
    if validation.index() != expected.as_slice() {
        return Err(Error::InvalidArgument("validation must follow the training rows hourly".into()));
    }
    Ok(())
}

fn run_grid<F>(lags: &[usize], trends: &[TrendSpec], validation_rows: usize, score: F) -> Result<GridSearchReport>
where
    F: Fn(usize, TrendSpec) -> Result<f64> + Sync,
{
    if lags.is_empty() || trends.is_empty() {
        return Err(Error::InvalidArgument("grid lists must be non-empty".into()));
    }
    let mut keys: Vec<GridKey> = lags
        .iter()
        .flat_map(|&p| trends.iter().map(move |&trend| GridKey { p, trend }))
        .collect();
    keys.sort();
    keys.dedup();
    let cells: Vec<GridCell> = keys
        .par_iter()
        .map(|key| {
            let outcome = score(key.p, key.trend).and_then(|rmse| {
                if rmse.is_finite() {
                    Ok(rmse)
                } else {
                    Err(Error::NonFinite("validation forecast".into()))
                }
            });
            match outcome {
                Ok(rmse) => GridCell { p: key.p, trend: key.trend, rmse: Some(rmse), error: None },
                Err(e) => GridCell { p: key.p, trend: key.trend, rmse: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let mut best: Option<(GridKey, f64)> = None;
    for c in &cells {
        if let Some(rmse) = c.rmse {
            if best.is_none_or(|(_, b)| rmse < b) {
                best = Some((GridKey { p: c.p, trend: c.trend }, rmse));
            }
        }
    }
    let (best, best_rmse) = best.ok_or(Error::NoFittableCell)?;
    Ok(GridSearchReport { cells, best, best_rmse, metric: "average_rmse".into(), validation_rows })
}

/// Fit every `(p, trend)` cell on `train`, forecast over `validation` and
/// score by average RMSE across variables. Failing cells are recorded, not
/// fatal, unless every cell fails.
pub fn grid_search(
    train: &TimeSeriesFrame,
    validation: &TimeSeriesFrame,
    lags: &[usize],
    trends: &[TrendSpec],
) -> Result<GridSearchReport> {
    check_adjacent(train, validation)?;
    run_grid(lags, trends, validation.len(), |p, trend| {
        let model = fit(train, p, trend)?;
        let fc = forecast(&model, validation.len())?;
        Ok(evaluate(validation, &fc)?.average.rmse)
    })
}

/// As [`grid_search`], but each cell is fitted on the `order`-times
/// differenced training data and its forecasts are integrated back to
/// levels before scoring.
pub fn grid_search_differenced(
    train: &TimeSeriesFrame,
    validation: &TimeSeriesFrame,
    order: usize,
    lags: &[usize],
    trends: &[TrendSpec],
) -> Result<GridSearchReport> {
    check_adjacent(train, validation)?;
    let diffed = difference(train, order)?;
    let anchors = train.tail(order);
    run_grid(lags, trends, validation.len(), |p, trend| {
        let model = fit(&diffed, p, trend)?;
        let fc = invert_difference(&forecast(&model, validation.len())?, &anchors)?;
        Ok(evaluate(validation, &fc)?.average.rmse)
    })
}
