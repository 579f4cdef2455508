//! Thin wrappers around LAPACK-backed dense decompositions.
//!
//! Everything here returns eigenvalues in ascending order with eigenvectors
//! as matrix columns, and converts backend errors into [`LinalgError`].

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, Inverse, UPLO};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dense eigensolve failed: {0}")]
    Eigh(String),
    #[error("matrix inversion failed (singular or ill-conditioned): {0}")]
    Inverse(String),
}

/// Eigendecomposition of a real symmetric matrix.
pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), LinalgError> {
    a.eigh(UPLO::Lower).map_err(|e| LinalgError::Eigh(e.to_string()))
}

/// Eigendecomposition of a complex Hermitian matrix.
pub fn eigh_complex(
    a: &Array2<Complex64>,
) -> Result<(Array1<f64>, Array2<Complex64>), LinalgError> {
    a.eigh(UPLO::Lower).map_err(|e| LinalgError::Eigh(e.to_string()))
}

/// Dense inverse of a real matrix.
pub fn inv_real(a: &Array2<f64>) -> Result<Array2<f64>, LinalgError> {
    a.inv().map_err(|e| LinalgError::Inverse(e.to_string()))
}
