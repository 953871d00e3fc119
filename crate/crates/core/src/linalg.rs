//! Small dense symmetric helpers on top of `nalgebra`.
//!
//! Determinants of kernels are always formed from symmetric eigenvalues; no
//! general LU is used on possibly singular matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues within this distance below zero are treated as zero.
pub const EIGEN_TOL: f64 = 1e-9;

/// Symmetric eigendecomposition with failure reporting.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NumericFailure(format!(
            "eigendecomposition of non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure(format!(
            "non-finite entry in {}x{} matrix passed to eigendecomposition",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(SymmetricEigen {
            eigenvectors: DMatrix::zeros(0, 0),
            eigenvalues: DVector::zeros(0),
        });
    }
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or_else(|| {
        Error::NumericFailure(format!(
            "symmetric eigendecomposition did not converge (n = {}, max |entry| = {:e})",
            m.nrows(),
            m.amax()
        ))
    })
}

/// Eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(sym_eigen(m)?.eigenvalues)
}

/// `V diag(values) V^T`.
pub fn reconstruct(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (mut col, &v) in scaled.column_iter_mut().zip(values.iter()) {
        col *= v;
    }
    let out = scaled * vectors.transpose();
    symmetrize(&out)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Determinant of a positive semi-definite matrix as the product of its
/// eigenvalues. Eigenvalues in `[-EIGEN_TOL, 0)` count as zero; larger negative
/// ones are an error.
pub fn psd_det(m: &DMatrix<f64>) -> Result<f64> {
    let values = sym_eigenvalues(m)?;
    let mut det = 1.0;
    for &v in values.iter() {
        if v < -EIGEN_TOL {
            return Err(Error::InvalidKernel(format!(
                "matrix is not positive semi-definite: eigenvalue {v:e}"
            )));
        }
        det *= v.max(0.0);
    }
    Ok(det)
}

/// Restriction of `m` to the rows and columns in `idx`.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_matrix_has_unit_determinant() {
        assert_eq!(psd_det(&DMatrix::zeros(0, 0)).unwrap(), 1.0);
    }

    #[test]
    fn determinant_matches_closed_form_2x2() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!((psd_det(&m).unwrap() - 1.75).abs() < 1e-14);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(psd_det(&m), Err(Error::InvalidKernel(_))));
    }

    #[test]
    fn reconstruct_inverts_eigendecomposition() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let e = sym_eigen(&m).unwrap();
        let back = reconstruct(&e.eigenvectors, &e.eigenvalues);
        assert!(max_abs_diff(&m, &back) < 1e-14);
    }

    #[test]
    fn nan_input_reports_numeric_failure() {
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(sym_eigen(&m), Err(Error::NumericFailure(_))));
    }
}
