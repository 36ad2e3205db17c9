//! Forecast-error variance decomposition.
//!
//! With MA coefficients `Φ_i` and a lower-triangular `P` such that
//! `P P' = Σ_u`, the orthogonalized responses are `Θ_i = Φ_i P` and the share
//! of variable `j`'s `h`-step error variance due to shock `k` is
//!
//! ```text
//! w_jk(h) = Σ_{i<h} Θ_i[j,k]² / MSE_j(h),   MSE_j(h) = Σ_{i<h} (Φ_i Σ_u Φ_i')[j,j]
//! ```

use std::io::Write;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::format_value;
use crate::var::FittedVar;

pub const DEFAULT_HORIZON: usize = 36;

/// Relative asymmetry tolerated in a covariance before factorization.
const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MaCoefficients {
    /// `Φ_0 .. Φ_{h-1}`
    pub phi: Vec<DMatrix<f64>>,
}

pub fn ma_representation(lag_matrices: &[DMatrix<f64>], horizons: usize) -> Result<MaCoefficients> {
    if horizons == 0 {
        return Err(Error::InvalidArgument("horizons must be at least 1".into()));
    }
    let k = lag_matrices
        .first()
        .map(|a| a.nrows())
        .ok_or_else(|| Error::InvalidArgument("model has no lag matrices".into()))?;
    let mut phi = vec![DMatrix::identity(k, k)];
    for s in 1..horizons {
        let mut next = DMatrix::zeros(k, k);
        for (i, beta) in lag_matrices.iter().enumerate().take(s) {
            next += beta * &phi[s - 1 - i];
        }
        phi.push(next);
    }
    Ok(MaCoefficients { phi })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn orthogonalize(sigma_u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma_u.is_square() || sigma_u.nrows() == 0 {
        return Err(Error::InvalidArgument("covariance must be a non-empty square matrix".into()));
    }
    if sigma_u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance".into()));
    }
    let scale = sigma_u.amax().max(f64::MIN_POSITIVE);
    if (sigma_u - sigma_u.transpose()).amax() > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotPositiveDefinite);
    }
    let sym = (sigma_u + sigma_u.transpose()) * 0.5;
    let l = sym.cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    if l.diagonal().iter().any(|d| *d <= 0.0 || !d.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FevdTable {
    pub variable_order: Vec<String>,
    /// `1..=h`
    pub horizons: Vec<usize>,
    /// `shares[h-1][j][k]`: fraction of variable `j`'s `h`-step error variance due to shock `k`.
    pub shares: Vec<Vec<Vec<f64>>>,
    /// `mse[h-1][j]`
    pub mse: Vec<Vec<f64>>,
    /// Diagonal jitter added to the covariance before factorization, 0 if none.
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FevdSummary {
    pub horizon: usize,
    pub variable_order: Vec<String>,
    pub jitter: f64,
    /// variable -> shock -> share at the final horizon
    pub shares: IndexMap<String, IndexMap<String, f64>>,
}

impl FevdTable {
    pub fn max_horizon(&self) -> usize {
        self.horizons.len()
    }

    pub fn share(&self, horizon: usize, variable: &str, shock: &str) -> Option<f64> {
        let j = self.variable_order.iter().position(|c| c == variable)?;
        let k = self.variable_order.iter().position(|c| c == shock)?;
        self.shares.get(horizon.checked_sub(1)?).map(|s| s[j][k])
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["horizon", "variable", "shock", "share"])?;
        for (h, block) in self.horizons.iter().zip(&self.shares) {
            for (var, row) in self.variable_order.iter().zip(block) {
                for (shock, s) in self.variable_order.iter().zip(row) {
                    w.write_record([h.to_string(), var.clone(), shock.clone(), format_value(*s)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> FevdSummary {
        let last = self.shares.last().expect("at least one horizon");
        let shares = self
            .variable_order
            .iter()
            .zip(last)
            .map(|(var, row)| (var.clone(), self.variable_order.iter().cloned().zip(row.iter().copied()).collect()))
            .collect();
        FevdSummary {
            horizon: self.max_horizon(),
            variable_order: self.variable_order.clone(),
            jitter: self.jitter,
            shares,
        }
    }
}

fn permutation<S: AsRef<str>>(columns: &[String], order: &[S]) -> Result<Vec<usize>> {
    let bad = || Error::BadPermutation(order.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>().join(","));
    if order.len() != columns.len() {
        return Err(bad());
    }
    let mut seen = vec![false; columns.len()];
    let mut perm = Vec::with_capacity(order.len());
    for name in order {
        let i = columns.iter().position(|c| c == name.as_ref()).ok_or_else(bad)?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(bad());
        }
        perm.push(i);
    }
    Ok(perm)
}

/// Decompose with the Cholesky factor taken in `variable_order`. The table is
/// indexed in that order.
pub fn decompose<S: AsRef<str>>(model: &FittedVar, horizons: usize, variable_order: &[S]) -> Result<FevdTable> {
    decompose_parts(&model.columns, &model.lag_matrices, &model.sigma_u, horizons, variable_order)
}

pub fn decompose_parts<S: AsRef<str>>(
    columns: &[String],
    lag_matrices: &[DMatrix<f64>],
    sigma_u: &DMatrix<f64>,
    horizons: usize,
    variable_order: &[S],
) -> Result<FevdTable> {
    let perm = permutation(columns, variable_order)?;
    let k = perm.len();
    let reorder = |m: &DMatrix<f64>| DMatrix::from_fn(k, k, |a, b| m[(perm[a], perm[b])]);
    let lags: Vec<DMatrix<f64>> = lag_matrices.iter().map(reorder).collect();
    if lags.iter().any(|a| a.shape() != (k, k)) || sigma_u.shape() != (k, k) {
        return Err(Error::ShapeMismatch("lag or covariance dimensions differ from the column count".into()));
    }
    let sigma = reorder(sigma_u);
    let (p, jitter) = match orthogonalize(&sigma) {
        Ok(p) => (p, 0.0),
        Err(Error::NotPositiveDefinite) => {
            let jitter = 1e-10 * sigma.trace() / k as f64;
            if jitter <= 0.0 || !jitter.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let bumped = &sigma + DMatrix::identity(k, k) * jitter;
            (orthogonalize(&bumped)?, jitter)
        }
        Err(e) => return Err(e),
    };
    let ma = ma_representation(&lags, horizons)?;
    let mut cum = DMatrix::<f64>::zeros(k, k);
    let mut shares = Vec::with_capacity(horizons);
    let mut mse = Vec::with_capacity(horizons);
    for phi in &ma.phi {
        let theta = phi * &p;
        cum += theta.map(|v| v * v);
        // Σ_k Θ_i[j,k]² = (Φ_i P P' Φ_i')[j,j], so row sums are the MSEs
        let row_mse: Vec<f64> = cum.row_iter().map(|r| r.sum()).collect();
        shares.push(
            (0..k)
                .map(|j| (0..k).map(|s| if row_mse[j] > 0.0 { cum[(j, s)] / row_mse[j] } else { 0.0 }).collect())
                .collect(),
        );
        mse.push(row_mse);
    }
    Ok(FevdTable {
        variable_order: perm.iter().map(|&i| columns[i].clone()).collect(),
        horizons: (1..=horizons).collect(),
        shares,
        mse,
        jitter,
    })
}
