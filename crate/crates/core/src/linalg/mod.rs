//! Dense complex linear algebra for small non-Hermitian problems.
//!
//! Everything here is hand-rolled: Householder/QR Schur decomposition,
//! one-sided Jacobi SVD, LU with partial pivoting and a Hungarian solver
//! used for eigenvector pairing. Matrices are stored row-major.

mod assign;
mod eigen;
mod lu;
mod schur;
mod svd;

use std::fmt;
use std::ops::Index;

pub use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assign::max_weight_assignment;
pub use eigen::{
    c_normalize, eig, eig_with, jordan_chain, EigOptions, EigenSystem, JordanChain, PhaseNorm,
};
pub use lu::{solve, Lu};
pub use svd::{svd, Svd};

/// Relative tolerance used when validating symmetry hints.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix dimension must be at least 1")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("symmetry hint {hint:?} violated at ({row}, {col}): mismatch {mismatch:.3e}")]
    SymmetryViolation {
        hint: Symmetry,
        row: usize,
        col: usize,
        mismatch: f64,
    },
    #[error("QR iteration did not converge; residual {residual:.3e}")]
    NonConvergence { residual: f64 },
    #[error("matrix is not complex symmetric")]
    NotComplexSymmetric,
    #[error("eigenvalue is not defective (geometric multiplicity {geometric_multiplicity})")]
    NotDefective { geometric_multiplicity: usize },
    #[error("z0 is not an eigenvalue (smallest singular value {sigma_min:.3e})")]
    NotAnEigenvalue { sigma_min: f64 },
    #[error("singular matrix (zero pivot in column {col})")]
    Singular { col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    #[default]
    General,
    ComplexSymmetric,
    Hermitian,
}

/// Dense square complex matrix with an optional structural hint.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<C64>,
    symmetry: Symmetry,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, validating the hint.
    pub fn new(n: usize, data: Vec<C64>, symmetry: Symmetry) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        for (idx, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(LinalgError::NonFinite {
                    row: idx / n,
                    col: idx % n,
                });
            }
        }
        let m = Self { n, data, symmetry };
        m.check_symmetry()?;
        Ok(m)
    }

    pub fn general(n: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        Self::new(n, data, Symmetry::General)
    }

    pub fn from_rows(rows: &[Vec<C64>], symmetry: Symmetry) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(LinalgError::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, data, symmetry)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
            symmetry: Symmetry::Hermitian,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![C64::new(1.0, 0.0); n])
    }

    /// Diagonal matrix. Tagged complex-symmetric (Hermitian if all entries are real).
    pub fn diag(d: &[C64]) -> Self {
        let n = d.len();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for (i, z) in d.iter().enumerate() {
            data[i * n + i] = *z;
        }
        let symmetry = if d.iter().all(|z| z.im == 0.0) {
            Symmetry::Hermitian
        } else {
            Symmetry::ComplexSymmetric
        };
        Self { n, data, symmetry }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    /// Re-tags the matrix; fails if the entries do not carry the claimed structure.
    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Result<Self, LinalgError> {
        self.symmetry = symmetry;
        self.check_symmetry()?;
        Ok(self)
    }

    /// Strongest structure the entries satisfy within [`SYMMETRY_TOL`].
    pub fn detect_symmetry(&self) -> Symmetry {
        let tol = SYMMETRY_TOL * self.max_abs();
        let mut sym = true;
        let mut herm = true;
        for i in 0..self.n {
            for j in i..self.n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                if (a - b).norm() > tol {
                    sym = false;
                }
                if (a - b.conj()).norm() > tol {
                    herm = false;
                }
            }
        }
        if herm {
            Symmetry::Hermitian
        } else if sym {
            Symmetry::ComplexSymmetric
        } else {
            Symmetry::General
        }
    }

    fn check_symmetry(&self) -> Result<(), LinalgError> {
        let tol = SYMMETRY_TOL * self.max_abs();
        for i in 0..self.n {
            for j in i..self.n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let mismatch = match self.symmetry {
                    Symmetry::General => 0.0,
                    Symmetry::ComplexSymmetric => (a - b).norm(),
                    Symmetry::Hermitian => (a - b.conj()).norm(),
                };
                if mismatch > tol {
                    return Err(LinalgError::SymmetryViolation {
                        hint: self.symmetry,
                        row: i,
                        col: j,
                        mismatch,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self {
            n,
            data,
            symmetry: self.symmetry,
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix dimension");
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// H − z·I, keeping the symmetry tag.
    pub fn shifted(&self, z: C64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * self.n + i] -= z;
        }
        if z.im != 0.0 && out.symmetry == Symmetry::Hermitian {
            out.symmetry = Symmetry::ComplexSymmetric;
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} ({:?})", self.n, self.n, self.symmetry)?;
        for row in self.data.chunks(self.n) {
            let cells: Vec<String> = row.iter().map(|z| format!("{:.6}", z)).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Bilinear product Σ aᵢbᵢ (no conjugation).
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sesquilinear product Σ conj(aᵢ)bᵢ.
pub fn hdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
