//! Differencing and train/test splitting.

use chrono::NaiveDateTime;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;

/// Apply the first difference `order` times. The result keeps the trailing
/// `T - order` timestamps.
pub fn difference(frame: &TimeSeriesFrame, order: usize) -> Result<TimeSeriesFrame> {
    if order == 0 {
        return Err(Error::InvalidArgument("differencing order must be positive".into()));
    }
    if frame.len() <= order {
        return Err(Error::InsufficientLength { required: order, actual: frame.len() });
    }
    let mut values = frame.values().clone();
    for _ in 0..order {
        let n = values.nrows();
        values = values.rows(1, n - 1) - values.rows(0, n - 1);
    }
    TimeSeriesFrame::new(
        frame.index()[order..].to_vec(),
        frame.columns().to_vec(),
        values,
    )
}

/// Undo [`difference`]. `anchors` are the `order` original rows immediately
/// preceding the first differenced row, so the differencing order is
/// `anchors.len()`. Returns the reconstructed levels on `diffed`'s index.
pub fn invert_difference(diffed: &TimeSeriesFrame, anchors: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    let order = anchors.len();
    if order == 0 {
        return Err(Error::AnchorMismatch("no anchor rows".into()));
    }
    if anchors.columns() != diffed.columns() {
        return Err(Error::AnchorMismatch("anchor columns differ from differenced columns".into()));
    }
    let k = diffed.n_vars();
    let mut out = DMatrix::zeros(diffed.len(), k);
    for j in 0..k {
        // levels[d] holds the latest value of the d-th difference of the series.
        let mut tower: Vec<f64> = anchors.values().column(j).iter().copied().collect();
        let mut levels = Vec::with_capacity(order);
        for _ in 0..order {
            levels.push(*tower.last().unwrap());
            tower = tower.windows(2).map(|w| w[1] - w[0]).collect();
        }
        for i in 0..diffed.len() {
            let mut acc = diffed.values()[(i, j)];
            for level in levels.iter_mut().rev() {
                acc += *level;
                *level = acc;
            }
            out[(i, j)] = acc;
        }
    }
    TimeSeriesFrame::new(diffed.index().to_vec(), diffed.columns().to_vec(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_start: NaiveDateTime,
}

/// Rows strictly before `test_start` train, the rest test.
pub fn split(frame: &TimeSeriesFrame, spec: SplitSpec) -> Result<(TimeSeriesFrame, TimeSeriesFrame)> {
    let cut = frame.index().partition_point(|t| *t < spec.test_start);
    if cut == 0 {
        return Err(Error::DegenerateSplit(format!(
            "no training rows before {}",
            spec.test_start
        )));
    }
    if cut == frame.len() {
        return Err(Error::DegenerateSplit(format!("no test rows at or after {}", spec.test_start)));
    }
    Ok((frame.slice_rows(0, cut), frame.slice_rows(cut, frame.len())))
}
