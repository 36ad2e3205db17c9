//! Loading, aligning and repairing raw hourly CSV sources.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{format_timestamp, format_value, parse_value, TimeSeriesFrame, TIMESTAMP_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Traffic,
    Weather,
}

fn default_timestamp_format() -> String {
    TIMESTAMP_FORMAT.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSource {
    pub path: PathBuf,
    pub kind: SourceKind,
    pub timestamp_column: String,
    pub value_columns: Vec<String>,
    /// strftime pattern; date-only patterns are read as midnight.
    #[serde(default = "default_timestamp_format")]
    pub timestamp_format: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LongGapStrategy {
    HourOfWeekMean,
    ForwardFill,
    DropRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationPolicy {
    pub max_gap_interpolate: usize,
    pub long_gap_strategy: LongGapStrategy,
    pub drop_column_missing_fraction: f64,
}

impl Default for ImputationPolicy {
    fn default() -> Self {
        Self {
            max_gap_interpolate: 3,
            long_gap_strategy: LongGapStrategy::HourOfWeekMean,
            drop_column_missing_fraction: 0.2,
        }
    }
}

impl ImputationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_gap_interpolate < 1 {
            return Err(Error::InvalidPolicy("max_gap_interpolate must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.drop_column_missing_fraction) {
            return Err(Error::InvalidPolicy("drop_column_missing_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMethod {
    LinearInterpolation,
    HourOfWeekMean,
    /// hour-of-week slot had no observations
    HourOfDayMean,
    /// neither slot had observations
    ColumnMean,
    ForwardFill,
    /// leading gap under forward fill
    BackwardFill,
}

impl fmt::Display for ImputeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::LinearInterpolation => "linear_interpolation",
            Self::HourOfWeekMean => "hour_of_week_mean",
            Self::HourOfDayMean => "hour_of_day_mean",
            Self::ColumnMean => "column_mean",
            Self::ForwardFill => "forward_fill",
            Self::BackwardFill => "backward_fill",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationEntry {
    pub column: String,
    pub timestamp: NaiveDateTime,
    pub method: ImputeMethod,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub column: String,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationLog {
    /// One entry per repaired cell.
    pub entries: Vec<ImputationEntry>,
    pub dropped_columns: Vec<DroppedColumn>,
    pub dropped_rows: Vec<NaiveDateTime>,
}

impl ImputationLog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.dropped_columns.is_empty() && self.dropped_rows.is_empty()
    }

    /// Writes repairs as `column,timestamp,method,value`. Dropped columns and
    /// rows are appended with methods `dropped_column` / `dropped_row` and an
    /// empty value so the file accounts for every change.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["column", "timestamp", "method", "value"])?;
        for e in &self.entries {
            w.write_record([
                e.column.clone(),
                format_timestamp(&e.timestamp),
                e.method.to_string(),
                format_value(e.value),
            ])?;
        }
        for d in &self.dropped_columns {
            w.write_record([d.column.as_str(), "", "dropped_column", ""])?;
        }
        for ts in &self.dropped_rows {
            w.write_record(["", &format_timestamp(ts), "dropped_row", ""])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_source_timestamp(raw: &str, format: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    NaiveDateTime::parse_from_str(raw, format)
        .ok()
        .or_else(|| NaiveDate::parse_from_str(raw, format).ok().and_then(|d| d.and_hms_opt(0, 0, 0)))
}

/// Read one source into a frame holding its value columns, sorted by time.
pub fn load_csv(source: &RawSource) -> Result<TimeSeriesFrame> {
    if source.value_columns.is_empty() {
        return Err(Error::MalformedHeader("no value columns declared".into()));
    }
    if source.value_columns.contains(&source.timestamp_column) {
        return Err(Error::MalformedHeader(source.timestamp_column.clone()));
    }
    if !source.path.exists() {
        return Err(Error::FileNotFound(source.path.clone()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&source.path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedHeader(name.to_string()))
    };
    let ts_col = find(&source.timestamp_column)?;
    let value_cols = source.value_columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<(NaiveDateTime, Vec<f64>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let raw_ts = rec.get(ts_col).unwrap_or("");
        let ts = parse_source_timestamp(raw_ts, &source.timestamp_format)
            .ok_or_else(|| Error::UnparseableTimestamp { row: i + 1, value: raw_ts.to_string() })?;
        let vals = value_cols
            .iter()
            .zip(&source.value_columns)
            .map(|(&c, name)| {
                let raw = rec.get(c).unwrap_or("");
                parse_value(raw).ok_or_else(|| Error::UnparseableValue {
                    row: i + 1,
                    column: name.clone(),
                    value: raw.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((ts, vals));
    }
    rows.sort_by_key(|(ts, _)| *ts);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateTimestamp(w[0].0));
    }
    let k = source.value_columns.len();
    let values = DMatrix::from_row_iterator(rows.len(), k, rows.iter().flat_map(|(_, v)| v.iter().copied()));
    TimeSeriesFrame::new(
        rows.into_iter().map(|(ts, _)| ts).collect(),
        source.value_columns.clone(),
        values,
    )
}

/// Place every frame on the complete hourly grid `[start, end]`. Slots a frame
/// does not cover become missing markers; rows outside the range are ignored.
pub fn align_hourly(frames: &[TimeSeriesFrame], start: NaiveDateTime, end: NaiveDateTime) -> Result<TimeSeriesFrame> {
    if start >= end {
        return Err(Error::EmptyRange);
    }
    for ts in [start, end] {
        if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return Err(Error::NotHourAligned(ts));
        }
    }
    let mut seen = HashSet::new();
    let mut columns = Vec::new();
    for f in frames {
        for c in f.columns() {
            if !seen.insert(c.clone()) {
                return Err(Error::ColumnNameCollision(c.clone()));
            }
            columns.push(c.clone());
        }
    }
    let n = (end - start).num_hours() as usize + 1;
    let mut values = DMatrix::from_element(n, columns.len(), f64::NAN);
    let mut offset = 0;
    for f in frames {
        for (i, ts) in f.index().iter().enumerate() {
            if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
                return Err(Error::NotHourAligned(*ts));
            }
            if *ts < start || *ts > end {
                continue;
            }
            let slot = (*ts - start).num_hours() as usize;
            for j in 0..f.n_vars() {
                values[(slot, offset + j)] = f.values()[(i, j)];
            }
        }
        offset += f.n_vars();
    }
    TimeSeriesFrame::hourly(start, columns, values)
}

/// Per-column lookup tables for long-gap fills, built from observed cells only.
struct SeasonalMeans {
    week: HashMap<(u32, u32), f64>,
    day: HashMap<u32, f64>,
    overall: f64,
}

impl SeasonalMeans {
    fn new(index: &[NaiveDateTime], col: &[f64]) -> Self {
        let mut week: HashMap<(u32, u32), (f64, usize)> = HashMap::new();
        let mut day: HashMap<u32, (f64, usize)> = HashMap::new();
        let (mut sum, mut n) = (0.0, 0usize);
        for (ts, &v) in index.iter().zip(col) {
            if v.is_nan() {
                continue;
            }
            let w = week.entry((ts.weekday().num_days_from_monday(), ts.hour())).or_default();
            w.0 += v;
            w.1 += 1;
            let d = day.entry(ts.hour()).or_default();
            d.0 += v;
            d.1 += 1;
            sum += v;
            n += 1;
        }
        let mean = |(s, c): (f64, usize)| s / c as f64;
        Self {
            week: week.into_iter().map(|(k, v)| (k, mean(v))).collect(),
            day: day.into_iter().map(|(k, v)| (k, mean(v))).collect(),
            overall: sum / n as f64,
        }
    }

    fn lookup(&self, ts: &NaiveDateTime) -> (f64, ImputeMethod) {
        if let Some(v) = self.week.get(&(ts.weekday().num_days_from_monday(), ts.hour())) {
            (*v, ImputeMethod::HourOfWeekMean)
        } else if let Some(v) = self.day.get(&ts.hour()) {
            (*v, ImputeMethod::HourOfDayMean)
        } else {
            (self.overall, ImputeMethod::ColumnMean)
        }
    }
}

/// Repair missing cells. Short interior gaps are interpolated linearly; long
/// gaps and gaps touching either end use the policy's long-gap strategy.
pub fn impute(frame: &TimeSeriesFrame, policy: &ImputationPolicy) -> Result<(TimeSeriesFrame, ImputationLog)> {
    policy.validate()?;
    let mut log = ImputationLog::default();
    if !frame.has_missing() {
        return Ok((frame.clone(), log));
    }
    frame.ensure_hourly()?;

    let t = frame.len();
    let mut keep = Vec::new();
    for (j, name) in frame.columns().iter().enumerate() {
        let missing = frame.values().column(j).iter().filter(|v| v.is_nan()).count();
        let fraction = missing as f64 / t as f64;
        if fraction > policy.drop_column_missing_fraction {
            log.dropped_columns.push(DroppedColumn { column: name.clone(), missing_fraction: fraction });
        } else if missing == t {
            return Err(Error::AllMissingColumn(name.clone()));
        } else {
            keep.push(name.clone());
        }
    }
    let kept = frame.select_columns(&keep)?;
    let index = kept.index();
    let mut values = kept.values().clone();
    let mut drop_row = vec![false; t];
    let mut entries: Vec<(usize, ImputationEntry)> = Vec::new();

    for (j, name) in keep.iter().enumerate() {
        let col: Vec<f64> = values.column(j).iter().copied().collect();
        let seasonal = (policy.long_gap_strategy == LongGapStrategy::HourOfWeekMean)
            .then(|| SeasonalMeans::new(index, &col));
        let mut i = 0;
        while i < t {
            if !col[i].is_nan() {
                i += 1;
                continue;
            }
            let run_start = i;
            while i < t && col[i].is_nan() {
                i += 1;
            }
            let run_end = i; // exclusive
            let before = run_start.checked_sub(1).map(|p| col[p]);
            let after = (run_end < t).then(|| col[run_end]);
            let len = run_end - run_start;
            for r in run_start..run_end {
                let fill = match (before, after) {
                    (Some(a), Some(b)) if len <= policy.max_gap_interpolate => {
                        let w = (r + 1 - run_start) as f64 / (len + 1) as f64;
                        Some((a + w * (b - a), ImputeMethod::LinearInterpolation))
                    }
                    _ => match policy.long_gap_strategy {
                        LongGapStrategy::HourOfWeekMean => seasonal.as_ref().map(|s| s.lookup(&index[r])),
                        LongGapStrategy::ForwardFill => Some(match before {
                            Some(a) => (a, ImputeMethod::ForwardFill),
                            None => (after.expect("column has an observation"), ImputeMethod::BackwardFill),
                        }),
                        LongGapStrategy::DropRows => {
                            drop_row[r] = true;
                            None
                        }
                    },
                };
                if let Some((value, method)) = fill {
                    values[(r, j)] = value;
                    entries.push((r, ImputationEntry { column: name.clone(), timestamp: index[r], method, value }));
                }
            }
        }
    }

    log.entries = entries.into_iter().filter(|(r, _)| !drop_row[*r]).map(|(_, e)| e).collect();
    let out = if drop_row.iter().any(|d| *d) {
        let rows: Vec<usize> = (0..t).filter(|r| !drop_row[*r]).collect();
        log.dropped_rows = (0..t).filter(|r| drop_row[*r]).map(|r| index[r]).collect();
        TimeSeriesFrame::new(
            rows.iter().map(|&r| index[r]).collect(),
            keep,
            values.select_rows(rows.iter()),
        )?
    } else {
        TimeSeriesFrame::new(index.to_vec(), keep, values)?
    };
    Ok((out, log))
}
