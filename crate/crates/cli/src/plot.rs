//! Chartable actual-versus-forecast series.

use std::io::Write;

use varlab::frame::{format_timestamp, format_value};
use varlab::{Error, TimeSeriesFrame};

/// Writes `timestamp,actual,forecast` for `column` over the timestamps both
/// frames share, in time order. Returns the number of rows written.
pub fn emit_plot_data<W: Write>(
    actual: &TimeSeriesFrame,
    forecast: &TimeSeriesFrame,
    column: &str,
    writer: W,
) -> Result<usize, Error> {
    let a = actual.column_index(column)?;
    let f = forecast.column_index(column)?;
    let mut rows = Vec::new();
    let mut j = 0;
    for (i, ts) in actual.index().iter().enumerate() {
        while j < forecast.len() && forecast.index()[j] < *ts {
            j += 1;
        }
        if j < forecast.len() && forecast.index()[j] == *ts {
            rows.push((*ts, actual.values()[(i, a)], forecast.values()[(j, f)]));
        }
    }
    if rows.is_empty() {
        return Err(Error::ShapeMismatch(format!("actual and forecast share no timestamps for `{column}`")));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "actual", "forecast"])?;
    for (ts, x, y) in &rows {
        w.write_record([format_timestamp(ts), format_value(*x), format_value(*y)])?;
    }
    w.flush()?;
    Ok(rows.len())
}
