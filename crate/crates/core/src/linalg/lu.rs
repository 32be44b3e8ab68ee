//! LU factorization with partial pivoting.

use super::{C64, ComplexMatrix, LinalgError};

#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<C64>,
    piv: Vec<usize>,
    odd: bool,
}

impl Lu {
    /// Factorizes `m`. A pivot that is exactly zero yields `Singular`.
    pub fn new(m: &ComplexMatrix) -> Result<Self, LinalgError> {
        let n = m.n();
        let mut lu = m.data().to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut odd = false;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&a, &b| lu[a * n + k].norm().total_cmp(&lu[b * n + k].norm()))
                .unwrap_or(k);
            if lu[p * n + k].norm() == 0.0 {
                return Err(LinalgError::Singular { col: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
                odd = !odd;
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                for j in k + 1..n {
                    let t = lu[k * n + j];
                    lu[i * n + j] -= f * t;
                }
            }
        }
        Ok(Self { n, lu, piv, odd })
    }

    pub fn det(&self) -> C64 {
        let d: C64 = (0..self.n).map(|k| self.lu[k * self.n + k]).product();
        if self.odd {
            -d
        } else {
            d
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length must match matrix dimension");
        let mut x: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = x[j];
                x[i] -= self.lu[i * n + j] * t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = x[j];
                x[i] -= self.lu[i * n + j] * t;
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

/// Solves m·x = b.
pub fn solve(m: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>, LinalgError> {
    Ok(Lu::new(m)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn solves_permuted_system() {
        let m = ComplexMatrix::general(
            3,
            vec![
                c(0.0, 0.0),
                c(2.0, 1.0),
                c(1.0, 0.0),
                c(1.0, -1.0),
                c(0.0, 0.0),
                c(3.0, 0.0),
                c(2.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 1.0),
            ],
        )
        .unwrap();
        let x = vec![c(1.0, 2.0), c(-1.0, 0.0), c(0.5, 0.5)];
        let b = m.mul_vec(&x);
        let got = solve(&m, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_matrix_is_singular() {
        let m = ComplexMatrix::zeros(2);
        assert_eq!(solve(&m, &[c(1.0, 0.0); 2]).unwrap_err(), LinalgError::Singular { col: 0 });
    }

    #[test]
    fn determinant_with_row_swap() {
        // [[0, 1], [2, 3]] has det −2 and needs one pivot swap.
        let m = ComplexMatrix::general(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]).unwrap();
        assert!((Lu::new(&m).unwrap().det() - c(-2.0, 0.0)).norm() < 1e-15);
    }
}
