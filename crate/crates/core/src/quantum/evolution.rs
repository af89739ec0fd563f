use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::pauli::{pauli_decompose, right_mul_exp};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrotterSplit {
    /// `A = D + M` with `D` the diagonal and `M` the off-diagonal part.
    DiagOffdiag,
    /// One factor per Pauli string of `A`.
    PauliTerms,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    ExactExponential,
    Trotterized { steps: usize, split: TrotterSplit },
}

/// Unitary `exp(i A t)` (or an approximation of it) on the system register.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionOperator {
    pub matrix: DMatrix<Complex64>,
    pub provenance: Provenance,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Contract(format!("matrix is {}x{}", a.nrows(), a.ncols())));
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Contract("evolution generator is not Hermitian".into()));
    }
    Ok(())
}

fn expi(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<Complex64>> {
    let eig = symmetric_eigen(a)?;
    let v = &eig.eigenvectors;
    // real eigenvectors: U = V cos(Lt) V^T + i V sin(Lt) V^T
    let mut vc = v.clone();
    let mut vs = v.clone();
    for (k, l) in eig.eigenvalues.iter().enumerate() {
        vc.column_mut(k).scale_mut((l * t).cos());
        vs.column_mut(k).scale_mut((l * t).sin());
    }
    let re = vc * v.transpose();
    let im = vs * v.transpose();
    Ok(re.zip_map(&im, Complex64::new))
}

pub fn exact_evolution(a: &DMatrix<f64>, t: f64) -> Result<EvolutionOperator> {
    check_symmetric(a)?;
    Ok(EvolutionOperator { matrix: expi(a, t)?, provenance: Provenance::ExactExponential })
}

/// First-order product formula `(prod_k exp(i A_k t/n))^n`.
pub fn trotter_evolution(a: &DMatrix<f64>, t: f64, steps: usize, split: TrotterSplit) -> Result<EvolutionOperator> {
    check_symmetric(a)?;
    if steps == 0 {
        return Err(Error::Config("trotter steps must be >= 1".into()));
    }
    let dt = t / steps as f64;
    let step = match split {
        TrotterSplit::DiagOffdiag => {
            let mut off = a.clone();
            off.fill_diagonal(0.0);
            let mut u = expi(&off, dt)?;
            for (r, d) in a.diagonal().iter().enumerate() {
                let phase = Complex64::from_polar(1.0, d * dt);
                u.row_mut(r).iter_mut().for_each(|z| *z *= phase);
            }
            u
        }
        TrotterSplit::PauliTerms => {
            let terms = pauli_decompose(a, 1e-14)?;
            let mut u = DMatrix::identity(a.nrows(), a.nrows());
            for term in &terms {
                right_mul_exp(&mut u, term, term.coeff * dt);
            }
            u
        }
    };
    let op = EvolutionOperator { matrix: step, provenance: Provenance::Trotterized { steps, split } };
    Ok(EvolutionOperator { matrix: op.power(steps as u64).matrix, provenance: op.provenance })
}

impl EvolutionOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `U^k` by repeated squaring.
    pub fn power(&self, mut k: u64) -> EvolutionOperator {
        let mut base = self.matrix.clone();
        let mut acc: Option<DMatrix<Complex64>> = None;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    Some(m) => m * &base,
                    None => base.clone(),
                });
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        let matrix = acc.unwrap_or_else(|| DMatrix::identity(self.dim(), self.dim()));
        EvolutionOperator { matrix, provenance: self.provenance }
    }

    pub fn adjoint(&self) -> EvolutionOperator {
        EvolutionOperator { matrix: self.matrix.adjoint(), provenance: self.provenance }
    }

    /// `max |(U^dagger U - I)_ij|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        (self.matrix.adjoint() * &self.matrix - DMatrix::<Complex64>::identity(n, n)).map(|z| z.norm()).max()
    }

    pub fn max_abs_diff(&self, other: &EvolutionOperator) -> f64 {
        (&self.matrix - &other.matrix).map(|z| z.norm()).max()
    }
}

/// Gershgorin bound `max_i sum_j |A_ij|`, an upper bound on the spectral radius.
pub fn gershgorin_upper(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}
