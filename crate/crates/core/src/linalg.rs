//! Dense least squares and spectral helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest flag a rank-deficient design.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Multi-response least-squares solution `X B ≈ Y`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// `m x r` coefficients, one column per response.
    pub coefficients: DMatrix<f64>,
    /// `n x r` residuals `Y - X B`.
    pub residuals: DMatrix<f64>,
    // R factor of the column-equilibrated design and the equilibration scales,
    // kept for covariance computations.
    r: DMatrix<f64>,
    scales: DVector<f64>,
}

impl LeastSquares {
    pub fn nobs(&self) -> usize {
        self.residuals.nrows()
    }

    pub fn nparams(&self) -> usize {
        self.coefficients.nrows()
    }

    /// Sum of squared residuals per response.
    pub fn ssr(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.residuals.ncols(),
            self.residuals.column_iter().map(|c| c.norm_squared()),
        )
    }

    /// Diagonal of `(X'X)^-1`.
    pub fn inverse_gram_diagonal(&self) -> DVector<f64> {
        let m = self.r.nrows();
        let r_inv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(m, m))
            .expect("R verified nonsingular at fit time");
        DVector::from_fn(m, |j, _| r_inv.row(j).norm_squared() / (self.scales[j] * self.scales[j]))
    }
}

/// Householder QR least squares on a column-equilibrated copy of `x`.
///
/// Rank is judged from the singular values of the triangular factor, which
/// are those of the equilibrated design.
pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LeastSquares> {
    let (n, m) = x.shape();
    assert_eq!(y.nrows(), n, "design and response row counts differ");
    if n < m || m == 0 {
        return Err(Error::InsufficientObservations { observations: n, regressors: m });
    }
    let scales = DVector::from_iterator(m, x.column_iter().map(|c| c.norm()));
    let zero_cols = scales.iter().filter(|s| **s == 0.0 || !s.is_finite()).count();
    if zero_cols > 0 {
        return Err(Error::SingularDesign { rank: m - zero_cols, columns: m });
    }
    let mut xs = x.clone();
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        col /= scales[j];
    }
    let qr = xs.qr();
    let r = qr.r();
    let sv = r.clone().singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|s| **s > RANK_TOLERANCE * smax).count();
    if rank < m {
        return Err(Error::SingularDesign { rank, columns: m });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let mut coefficients = r
        .solve_upper_triangular(&qty.rows(0, m).into_owned())
        .ok_or(Error::SingularDesign { rank, columns: m })?;
    for (j, mut row) in coefficients.row_iter_mut().enumerate() {
        row /= scales[j];
    }
    let residuals = y - x * &coefficients;
    Ok(LeastSquares { coefficients, residuals, r, scales })
}

/// Single-response convenience wrapper.
pub fn least_squares_vec(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    least_squares(x, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()))
}

/// Moduli of the eigenvalues of a real square matrix, in no particular order.
pub fn eigenvalue_moduli(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    assert!(m.is_square());
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = fm
        .eigenvalues()
        .map_err(|e| Error::InvalidArgument(format!("eigenvalue iteration failed: {e:?}")))?;
    Ok(eig.iter().map(|z| z.re.hypot(z.im)).collect())
}
