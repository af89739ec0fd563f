//! Dense symmetric eigendecomposition shared by the solver and simulator.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigendecomposition of a real symmetric matrix.
///
/// The implicit QR iteration can return NaN on matrices with an all-zero
/// diagonal and decoupled blocks, so the spectrum is shifted to be positive
/// first and the iterative variant is tried if the result is still not finite.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = a.nrows();
    let shift = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let mut eig = SymmetricEigen::new(a + DMatrix::<f64>::identity(n, n) * shift);
    eig.eigenvalues.add_scalar_mut(-shift);
    if is_finite(&eig) {
        return Ok(eig);
    }
    match a.clone().try_symmetric_eigen(f64::EPSILON, 100_000) {
        Some(e) if is_finite(&e) => Ok(e),
        _ => Err(Error::Contract("symmetric eigendecomposition did not converge".into())),
    }
}

fn is_finite(e: &SymmetricEigen<f64, nalgebra::Dyn>) -> bool {
    e.eigenvalues.iter().chain(e.eigenvectors.iter()).all(|v| v.is_finite())
}
