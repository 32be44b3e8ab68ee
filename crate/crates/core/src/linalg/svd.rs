//! One-sided complex Jacobi SVD.

use super::{hdot, C64, ComplexMatrix};

/// M = U·diag(σ)·V†. Columns are stored as separate vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Left singular vectors; `u[j]` is zero when `sigma[j]` is zero.
    pub u: Vec<Vec<C64>>,
    pub sigma: Vec<f64>,
    pub v: Vec<Vec<C64>>,
}

const MAX_SWEEPS: usize = 60;

pub fn svd(m: &ComplexMatrix) -> Svd {
    let n = m.n();
    // a[j] = column j of M
    let mut a: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| m.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = hdot(&a[p], &a[q]);
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let ph = C64::from_polar(1.0, -gamma.arg());
                for z in a[q].iter_mut() {
                    *z *= ph;
                }
                for z in v[q].iter_mut() {
                    *z *= ph;
                }
                let zeta = (beta - alpha) / (2.0 * g);
                let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for cols in [&mut a, &mut v] {
                    for i in 0..n {
                        let x = cols[p][i];
                        let y = cols[q][i];
                        cols[p][i] = x * cs - y * sn;
                        cols[q][i] = x * sn + y * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for col in a {
        let s = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        sigma.push(s);
        if s > 0.0 {
            u.push(col.into_iter().map(|z| z / s).collect());
        } else {
            u.push(vec![C64::new(0.0, 0.0); n]);
        }
    }
    Svd { u, sigma, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, Symmetry};

    #[test]
    fn reconstructs_and_is_orthonormal() {
        let m = ComplexMatrix::new(
            3,
            vec![
                c(1.0, 0.5),
                c(2.0, 0.0),
                c(0.0, -1.0),
                c(0.0, 0.0),
                c(1.0, 1.0),
                c(3.0, 0.0),
                c(-1.0, 2.0),
                c(0.5, 0.5),
                c(1.0, 0.0),
            ],
            Symmetry::General,
        )
        .unwrap();
        let s = svd(&m);
        for i in 0..3 {
            for j in 0..3 {
                let r: C64 = (0..3).map(|k| s.u[k][i] * s.sigma[k] * s.v[k][j].conj()).sum();
                assert!((r - m.get(i, j)).norm() < 1e-13);
                let vv = hdot(&s.v[i], &s.v[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vv - c(want, 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rank_deficient() {
        // [[1, i], [i, -1]] has rank 1.
        let m = ComplexMatrix::general(2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(-1.0, 0.0)])
            .unwrap();
        let s = svd(&m);
        let mut sig = s.sigma.clone();
        sig.sort_by(f64::total_cmp);
        assert!(sig[0] < 1e-15);
        assert!((sig[1] - 2.0).abs() < 1e-14);
    }
}
