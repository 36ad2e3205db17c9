//! VAR stability from the eigenvalues of the companion matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::eigenvalue_moduli;
use crate::var::FittedVar;

/// Eigenvalues within this distance of the unit circle count as on it.
pub const UNIT_CIRCLE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    /// Characteristic-root moduli `1/|λ|`, ascending. Zero eigenvalues
    /// (roots at infinity) are omitted.
    pub root_moduli: Vec<f64>,
    pub max_eigenvalue_modulus: f64,
    pub is_stable: bool,
}

/// The `(K·p) x (K·p)` companion matrix: lag matrices across the first block
/// row, identity blocks on the sub-diagonal.
pub fn companion_matrix(lag_matrices: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = lag_matrices.len();
    let k = lag_matrices.first().map_or(0, |a| a.nrows());
    let n = k * p;
    let mut c = DMatrix::zeros(n, n);
    for (i, a) in lag_matrices.iter().enumerate() {
        c.view_mut((0, i * k), (k, k)).copy_from(a);
    }
    for i in k..n {
        c[(i, i - k)] = 1.0;
    }
    c
}

pub fn stability_from_lags(lag_matrices: &[DMatrix<f64>]) -> Result<StabilityResult> {
    let moduli = eigenvalue_moduli(&companion_matrix(lag_matrices))?;
    let max_eigenvalue_modulus = moduli.iter().copied().fold(0.0, f64::max);
    let mut root_moduli: Vec<f64> = moduli.iter().filter(|m| **m > 0.0).map(|m| 1.0 / m).collect();
    root_moduli.sort_by(f64::total_cmp);
    Ok(StabilityResult {
        root_moduli,
        max_eigenvalue_modulus,
        is_stable: max_eigenvalue_modulus < 1.0 - UNIT_CIRCLE_TOLERANCE,
    })
}

pub fn stability_check(model: &FittedVar) -> Result<StabilityResult> {
    stability_from_lags(&model.lag_matrices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(coefs: &[f64]) -> Vec<DMatrix<f64>> {
        coefs.iter().map(|a| DMatrix::from_element(1, 1, *a)).collect()
    }

    #[test]
    fn scalar_var1_boundaries() {
        let r = stability_from_lags(&scalar(&[0.5])).unwrap();
        assert!(r.is_stable);
        assert!((r.root_moduli[0] - 2.0).abs() < 1e-12);
        let r = stability_from_lags(&scalar(&[1.0])).unwrap();
        assert!(!r.is_stable);
        assert!((r.root_moduli[0] - 1.0).abs() < 1e-12);
        assert!(!stability_from_lags(&scalar(&[1.1])).unwrap().is_stable);
        assert!(!stability_from_lags(&scalar(&[-1.0])).unwrap().is_stable);
    }

    #[test]
    fn scalar_var2_matches_quadratic_formula() {
        // 1 - 0.5 z - 0.3 z² = 0  <=>  0.3 z² + 0.5 z - 1 = 0
        let (a, b, c) = (0.3f64, 0.5, -1.0);
        let disc = (b * b - 4.0 * a * c).sqrt();
        let mut oracle = [((-b + disc) / (2.0 * a)).abs(), ((-b - disc) / (2.0 * a)).abs()];
        oracle.sort_by(f64::total_cmp);
        let r = stability_from_lags(&scalar(&[0.5, 0.3])).unwrap();
        assert!(r.is_stable);
        assert_eq!(r.root_moduli.len(), 2);
        for (got, want) in r.root_moduli.iter().zip(oracle) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!((oracle[0] - 1.1736).abs() < 1e-4 && (oracle[1] - 2.8403).abs() < 1e-4);
    }

    #[test]
    fn zero_dynamics_have_no_finite_roots() {
        let r = stability_from_lags(&vec![DMatrix::zeros(3, 3); 4]).unwrap();
        assert!(r.root_moduli.is_empty());
        assert!(r.is_stable);
        assert_eq!(r.max_eigenvalue_modulus, 0.0);
    }

    #[test]
    fn diagonal_var1_roots_are_reciprocals() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.2, -0.5, 0.8]));
        let r = stability_from_lags(&[a]).unwrap();
        let want = [1.0 / 0.8, 2.0, 5.0];
        for (got, w) in r.root_moduli.iter().zip(want) {
            assert!((got - w).abs() < 1e-10);
        }
    }

    #[test]
    fn companion_layout() {
        let a1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let a2 = DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let c = companion_matrix(&[a1, a2]);
        let want = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        );
        assert_eq!(c, want);
    }

    #[test]
    fn rotation_is_on_the_unit_circle() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let r = stability_from_lags(&[a * 0.9]).unwrap();
        assert!(r.is_stable);
        assert!(r.root_moduli.iter().all(|m| (m - 1.0 / 0.9).abs() < 1e-10));
    }
}
