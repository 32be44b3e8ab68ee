//! Complex Schur decomposition H = Z T Z†.

use super::{C64, LinalgError};

const EPS: f64 = f64::EPSILON;

pub(crate) struct Schur {
    pub n: usize,
    /// Upper triangular factor, row-major.
    pub t: Vec<C64>,
    /// Unitary factor, row-major.
    pub z: Vec<C64>,
}

/// Budget of QR sweeps per deflated eigenvalue.
fn iteration_budget(n: usize) -> usize {
    30 * n.max(10)
}

pub(crate) fn schur(n: usize, a: &[C64]) -> Result<Schur, LinalgError> {
    let mut h = a.to_vec();
    let mut z = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        z[i * n + i] = C64::new(1.0, 0.0);
    }
    hessenberg(n, &mut h, &mut z);
    qr_iterate(n, &mut h, &mut z)?;
    for i in 1..n {
        for j in 0..i {
            h[i * n + j] = C64::new(0.0, 0.0);
        }
    }
    Ok(Schur { n, t: h, z })
}

fn hessenberg(n: usize, h: &mut [C64], z: &mut [C64]) {
    if n < 3 {
        return;
    }
    let zero = C64::new(0.0, 0.0);
    for k in 0..n - 2 {
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[i * n + k]).collect();
        let xnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() > 0.0 {
            v[0] / v[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        // Left: rows k+1.. ← (I − 2vv†) rows
        for j in 0..n {
            let mut s = zero;
            for (off, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + off) * n + j];
            }
            s *= 2.0;
            for (off, vi) in v.iter().enumerate() {
                h[(k + 1 + off) * n + j] -= vi * s;
            }
        }
        // Right: columns k+1.. ← cols (I − 2vv†), same on Z
        for m in [&mut *h, &mut *z] {
            for i in 0..n {
                let mut s = zero;
                for (off, vi) in v.iter().enumerate() {
                    s += m[i * n + k + 1 + off] * vi;
                }
                s *= 2.0;
                for (off, vi) in v.iter().enumerate() {
                    m[i * n + k + 1 + off] -= s * vi.conj();
                }
            }
        }
        h[(k + 1) * n + k] = alpha;
        for i in k + 2..n {
            h[i * n + k] = zero;
        }
    }
}

/// Rotation G = [[c, s], [−s̄, c]] with G·(a, b)ᵀ = (ρ·a/|a|, 0)ᵀ.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let rho = an.hypot(bn);
    (an / rho, (a / an) * b.conj() / rho)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let r = disc.sqrt();
    let l1 = half + r;
    let l2 = half - r;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn qr_iterate(n: usize, h: &mut [C64], z: &mut [C64]) -> Result<(), LinalgError> {
    if n == 1 {
        return Ok(());
    }
    let hnorm = h.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let tiny = f64::MIN_POSITIVE * (n as f64) / EPS;
    let budget = iteration_budget(n);
    let mut hi = n - 1;
    let mut iter = 0usize;
    while hi > 0 {
        // Find the start of the unreduced block ending at `hi`.
        let mut l = hi;
        while l > 0 {
            let sub = h[l * n + l - 1].norm();
            let mut diag = h[l * n + l].norm() + h[(l - 1) * n + l - 1].norm();
            if diag == 0.0 {
                diag = hnorm;
            }
            if sub <= EPS * diag || sub <= tiny {
                h[l * n + l - 1] = C64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > budget {
            let residual = (1..=hi)
                .map(|k| h[k * n + k - 1].norm())
                .fold(0.0, f64::max);
            return Err(LinalgError::NonConvergence { residual });
        }
        let mu = if iter % 10 == 0 {
            // Exceptional shift to break cycles.
            h[hi * n + hi] + 0.75 * h[hi * n + hi - 1].norm()
        } else {
            wilkinson_shift(
                h[(hi - 1) * n + hi - 1],
                h[(hi - 1) * n + hi],
                h[hi * n + hi - 1],
                h[hi * n + hi],
            )
        };
        for k in l..=hi {
            h[k * n + k] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (c, s) = givens(h[k * n + k], h[(k + 1) * n + k]);
            for j in k..n {
                let x = h[k * n + j];
                let y = h[(k + 1) * n + j];
                h[k * n + j] = c * x + s * y;
                h[(k + 1) * n + j] = -s.conj() * x + c * y;
            }
            h[(k + 1) * n + k] = C64::new(0.0, 0.0);
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            for i in 0..=(k + 1) {
                let x = h[i * n + k];
                let y = h[i * n + k + 1];
                h[i * n + k] = c * x + s.conj() * y;
                h[i * n + k + 1] = -s * x + c * y;
            }
            for i in 0..n {
                let x = z[i * n + k];
                let y = z[i * n + k + 1];
                z[i * n + k] = c * x + s.conj() * y;
                z[i * n + k + 1] = -s * x + c * y;
            }
        }
        for k in l..=hi {
            h[k * n + k] += mu;
        }
    }
    Ok(())
}

/// Right eigenvectors of the triangular factor, mapped back through Z.
/// Column k of the returned (row-major) matrix belongs to T[k][k].
pub(crate) fn schur_vectors(s: &Schur) -> Vec<Vec<C64>> {
    let n = s.n;
    let tnorm = s.t.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    let floor = EPS * tnorm;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let lam = s.t[k * n + k];
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += s.t[i * n + j] * y[j];
            }
            let mut d = s.t[i * n + i] - lam;
            if d.norm() < floor {
                d = C64::new(floor, 0.0);
            }
            y[i] = -acc / d;
        }
        let x: Vec<C64> = (0..n)
            .map(|i| (0..=k).map(|j| s.z[i * n + j] * y[j]).sum())
            .collect();
        out.push(x);
    }
    out
}
