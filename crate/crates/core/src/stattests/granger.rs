//! Pairwise Granger causality F-tests.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::frame::{format_value, TimeSeriesFrame};
use crate::linalg::least_squares_vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dof {
    pub numerator: usize,
    pub denominator: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub cause: String,
    pub effect: String,
    pub lag: usize,
    pub f_statistic: f64,
    pub p_value: f64,
    pub dof: Dof,
}

impl GrangerResult {
    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Does `cause` help predict `effect` beyond `effect`'s own `lag` lags?
///
/// Both regressions include an intercept and use the `T - lag` observations
/// that have a full lag history. With `n = T - lag`,
/// `F = ((SSR_r - SSR_u) / lag) / (SSR_u / (n - 2·lag - 1))`.
pub fn granger_test(frame: &TimeSeriesFrame, cause: &str, effect: &str, lag: usize) -> Result<GrangerResult> {
    let x = frame.column(cause)?;
    let y = frame.column(effect)?;
    if cause == effect {
        return Err(Error::InvalidArgument("cause and effect must differ".into()));
    }
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be positive".into()));
    }
    let t = frame.len();
    let required = 3 * lag + 1;
    if t <= required {
        return Err(Error::InsufficientLength { required, actual: t });
    }
    for (name, v) in [(cause, &x), (effect, &y)] {
        if v.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite(name.to_string()));
        }
    }
    let n = t - lag;
    let target = DVector::from_fn(n, |r, _| y[lag + r]);
    let unrestricted = DMatrix::from_fn(n, 1 + 2 * lag, |r, c| {
        let row = lag + r;
        match c {
            0 => 1.0,
            c if c <= lag => y[row - c],
            c => x[row - (c - lag)],
        }
    });
    let restricted = unrestricted.columns(0, 1 + lag).into_owned();
    let ssr_u = least_squares_vec(&unrestricted, &target)?.ssr()[0];
    let ssr_r = least_squares_vec(&restricted, &target)?.ssr()[0];
    let dof = Dof { numerator: lag, denominator: n - 2 * lag - 1 };
    let f_statistic = if ssr_u > 0.0 {
        (((ssr_r - ssr_u) / lag as f64) / (ssr_u / dof.denominator as f64)).max(0.0)
    } else {
        f64::INFINITY
    };
    let dist = FisherSnedecor::new(dof.numerator as f64, dof.denominator as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p_value = if f_statistic.is_finite() { dist.sf(f_statistic).clamp(0.0, 1.0) } else { 0.0 };
    Ok(GrangerResult {
        cause: cause.to_string(),
        effect: effect.to_string(),
        lag,
        f_statistic,
        p_value,
        dof,
    })
}

/// All ordered (cause, effect) pairs. `cells[i][j]` tests column `i`
/// causing column `j`; the diagonal is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerMatrix {
    pub columns: Vec<String>,
    pub lag: usize,
    pub cells: Vec<Vec<Option<GrangerResult>>>,
}

impl GrangerMatrix {
    pub fn get(&self, cause: &str, effect: &str) -> Option<&GrangerResult> {
        let i = self.columns.iter().position(|c| c == cause)?;
        let j = self.columns.iter().position(|c| c == effect)?;
        self.cells[i][j].as_ref()
    }

    pub fn results(&self) -> impl Iterator<Item = &GrangerResult> {
        self.cells.iter().flatten().flatten()
    }

    /// p-values with causes as rows and effects as columns.
    pub fn write_p_value_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["cause".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (i, cause) in self.columns.iter().enumerate() {
            let mut rec = vec![cause.clone()];
            rec.extend(
                self.cells[i]
                    .iter()
                    .map(|c| c.as_ref().map(|r| format_value(r.p_value)).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn granger_matrix(frame: &TimeSeriesFrame, lag: usize) -> Result<GrangerMatrix> {
    let k = frame.n_vars();
    if k < 2 {
        return Err(Error::InvalidArgument("granger matrix needs at least two columns".into()));
    }
    let cols = frame.columns();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).filter(move |j| *j != i).map(move |j| (i, j))).collect();
    let results = pairs
        .par_iter()
        .map(|&(i, j)| granger_test(frame, &cols[i], &cols[j], lag))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = vec![vec![None; k]; k];
    for ((i, j), r) in pairs.into_iter().zip(results) {
        cells[i][j] = Some(r);
    }
    Ok(GrangerMatrix { columns: cols.to_vec(), lag, cells })
}
