//! Timestamp-indexed multivariate series.
//!
//! A [`TimeSeriesFrame`] is a `T x K` matrix of observations with a strictly
//! ascending timestamp index and unique column names. Missing cells are
//! stored as `NaN`; every estimation routine rejects frames that still contain
//! them, so the ingestion layer is the only place missing markers live.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Timestamp layout used in every CSV this crate writes.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT).ok()
}

pub fn one_hour() -> Duration {
    Duration::hours(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    index: Vec<NaiveDateTime>,
    columns: Vec<String>,
    values: DMatrix<f64>,
}

impl TimeSeriesFrame {
    pub fn new(index: Vec<NaiveDateTime>, columns: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != index.len() {
            return Err(Error::InvalidFrame(format!(
                "{} index entries but {} value rows",
                index.len(),
                values.nrows()
            )));
        }
        if values.ncols() != columns.len() {
            return Err(Error::InvalidFrame(format!(
                "{} column names but {} value columns",
                columns.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::with_capacity(columns.len());
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::ColumnNameCollision(c.clone()));
            }
        }
        if let Some(w) = index.windows(2).find(|w| w[1] <= w[0]) {
            if w[0] == w[1] {
                return Err(Error::DuplicateTimestamp(w[0]));
            }
            return Err(Error::InvalidFrame(format!("index not ascending at {}", w[1])));
        }
        Ok(Self { index, columns, values })
    }

    /// Build a frame on a complete hourly grid starting at `start`.
    pub fn hourly(start: NaiveDateTime, columns: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let index = hourly_grid(start, values.nrows());
        Self::new(index, columns, values)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn index(&self) -> &[NaiveDateTime] {
        &self.index
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_parts(self) -> (Vec<NaiveDateTime>, Vec<String>, DMatrix<f64>) {
        (self.index, self.columns, self.values)
    }

    pub fn first_timestamp(&self) -> Option<NaiveDateTime> {
        self.index.first().copied()
    }

    pub fn last_timestamp(&self) -> Option<NaiveDateTime> {
        self.index.last().copied()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let j = self.column_index(name)?;
        Ok(self.values.column(j).into_owned())
    }

    /// Rows `start..end` as a new frame.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.len());
        let start = start.min(end);
        Self {
            index: self.index[start..end].to_vec(),
            columns: self.columns.clone(),
            values: self.values.rows(start, end - start).into_owned(),
        }
    }

    pub fn head(&self, n: usize) -> Self {
        self.slice_rows(0, n)
    }

    pub fn tail(&self, n: usize) -> Self {
        let n = n.min(self.len());
        self.slice_rows(self.len() - n, self.len())
    }

    /// New frame containing the named columns, in the given order.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let values = self.values.select_columns(idx.iter());
        Self::new(
            self.index.clone(),
            names.iter().map(|n| n.as_ref().to_string()).collect(),
            values,
        )
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    /// Fails with [`Error::NonFinite`] naming the first offending column.
    pub fn ensure_finite(&self) -> Result<()> {
        for (j, name) in self.columns.iter().enumerate() {
            if self.values.column(j).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name.clone()));
            }
        }
        Ok(())
    }

    /// True when consecutive timestamps are exactly one hour apart and all
    /// fall on an hour boundary.
    pub fn is_hourly_complete(&self) -> bool {
        self.index.iter().all(|t| t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0)
            && self.index.windows(2).all(|w| w[1] - w[0] == one_hour())
    }

    pub fn ensure_hourly(&self) -> Result<()> {
        if self.is_hourly_complete() {
            Ok(())
        } else {
            Err(Error::NotHourly)
        }
    }

    /// Timestamps continuing the index hourly after the last row.
    pub fn continuation_index(&self, steps: usize) -> Vec<NaiveDateTime> {
        match self.last_timestamp() {
            Some(last) => hourly_grid(last + one_hour(), steps),
            None => Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.n_vars() + 1);
        header.push("timestamp".to_string());
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (i, ts) in self.index.iter().enumerate() {
            let mut rec = Vec::with_capacity(self.n_vars() + 1);
            rec.push(format_timestamp(ts));
            rec.extend(self.values.row(i).iter().map(|v| format_value(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Read a frame written by [`TimeSeriesFrame::write_csv`]. Empty cells
    /// become missing markers.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.get(0).map(str::trim) != Some("timestamp") {
            return Err(Error::MalformedHeader("timestamp".into()));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut index = Vec::new();
        let mut data = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let ts_raw = rec.get(0).unwrap_or("");
            let ts = parse_timestamp(ts_raw).ok_or_else(|| Error::UnparseableTimestamp {
                row: row + 1,
                value: ts_raw.to_string(),
            })?;
            index.push(ts);
            for (j, name) in columns.iter().enumerate() {
                let raw = rec.get(j + 1).unwrap_or("");
                data.push(parse_value(raw).ok_or_else(|| Error::UnparseableValue {
                    row: row + 1,
                    column: name.clone(),
                    value: raw.to_string(),
                })?);
            }
        }
        let values = DMatrix::from_row_slice(index.len(), columns.len(), &data);
        Self::new(index, columns, values)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub fn hourly_grid(start: NaiveDateTime, n: usize) -> Vec<NaiveDateTime> {
    (0..n).map(|i| start + Duration::hours(i as i64)).collect()
}

/// Shortest round-trip representation; missing cells become empty strings.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Parses a numeric cell. Empty cells and the usual NA spellings map to `NaN`.
pub fn parse_value(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() || matches!(s.to_ascii_lowercase().as_str(), "na" | "nan" | "null" | "none") {
        return Some(f64::NAN);
    }
    s.parse::<f64>().ok()
}
