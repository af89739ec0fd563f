//! Pauli-basis decomposition of real symmetric matrices.
//!
//! A Pauli string on `n` qubits is stored as a pair of bit masks `(x, z)`:
//! qubit `q` carries `I`, `X`, `Z` or `Y` for `(x_q, z_q)` equal to `(0,0)`,
//! `(1,0)`, `(0,1)` or `(1,1)`. Its action on a basis state is
//! `P|k> = i^{|x & z|} (-1)^{|k & z|} |k ^ x>`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub x: u64,
    pub z: u64,
    pub coeff: f64,
}

impl PauliTerm {
    /// Number of non-identity factors.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Number of `X` or `Y` factors.
    pub fn n_xy(&self) -> u32 {
        self.x.count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_z_type(&self) -> bool {
        self.x == 0
    }

    /// Label with qubit 0 rightmost, e.g. `"IXZ"`.
    pub fn label(&self, n_qubits: usize) -> String {
        (0..n_qubits)
            .rev()
            .map(|q| match ((self.x >> q) & 1, (self.z >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            })
            .collect()
    }

    /// `i^{|x & z|} (-1)^{|k & z|}`, the nonzero entry of column `k`.
    pub fn phase(&self, k: usize) -> Complex64 {
        let sign = if ((k as u64) & self.z).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        i_pow((self.x & self.z).count_ones()) * sign
    }
}

fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*a + *b, *a - *b);
                *a = s;
                *b = d;
            }
        }
        h *= 2;
    }
}

/// Coefficients `c_P = tr(P A) / N` above `tol` in magnitude, ordered by
/// `(x, z)`. `A` must be real symmetric with power-of-two dimension.
pub fn pauli_decompose(a: &DMatrix<f64>, tol: f64) -> Result<Vec<PauliTerm>> {
    let n = a.nrows();
    if n != a.ncols() || !n.is_power_of_two() {
        return Err(Error::Contract(format!("Pauli decomposition needs a 2^k square matrix, got {}x{}", n, a.ncols())));
    }
    if n > 1 << 20 {
        return Err(Error::Budget { required: n.trailing_zeros() as usize, limit: 20 });
    }
    let mut terms = Vec::new();
    let mut col = vec![0.0; n];
    for x in 0..n {
        let mut any = false;
        for (k, c) in col.iter_mut().enumerate() {
            *c = a[(k, k ^ x)];
            any |= *c != 0.0;
        }
        if !any {
            continue;
        }
        walsh_hadamard(&mut col);
        for (z, &w) in col.iter().enumerate() {
            let coeff = (i_pow(((x & z) as u64).count_ones()) * (w / n as f64)).re;
            if coeff.abs() > tol {
                terms.push(PauliTerm { x: x as u64, z: z as u64, coeff });
            }
        }
    }
    Ok(terms)
}

/// Dense matrix of the Pauli string on `n_qubits` qubits.
pub fn pauli_matrix(term: &PauliTerm, n_qubits: usize) -> DMatrix<Complex64> {
    let n = 1usize << n_qubits;
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        m[(k ^ term.x as usize, k)] = term.phase(k);
    }
    m
}

/// `u <- u * exp(i theta P)` using `exp(i theta P) = cos(theta) I + i sin(theta) P`.
pub(crate) fn right_mul_exp(u: &mut DMatrix<Complex64>, term: &PauliTerm, theta: f64) {
    let (c, s) = (theta.cos(), theta.sin());
    let old = u.clone();
    let x = term.x as usize;
    for j in 0..u.ncols() {
        let f = Complex64::new(0.0, s) * term.phase(j);
        for r in 0..u.nrows() {
            u[(r, j)] = old[(r, j)] * c + old[(r, j ^ x)] * f;
        }
    }
}
