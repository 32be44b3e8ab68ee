//! Eigendecomposition with biorthogonal pairing and c-normalization.

use serde::Serialize;

use super::assign::max_weight_assignment;
use super::schur::{schur, schur_vectors};
use super::svd::svd;
use super::{cdot, hdot, norm2, ComplexMatrix, LinalgError, Symmetry, C64};

/// Conjugated norm A_k of a c-normalized vector, or its divergence at an EP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PhaseNorm {
    Finite(f64),
    Divergent,
}

impl PhaseNorm {
    /// The value, with `Divergent` mapped to +∞.
    pub fn value(self) -> f64 {
        match self {
            PhaseNorm::Finite(a) => a,
            PhaseNorm::Divergent => f64::INFINITY,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, PhaseNorm::Divergent)
    }
}

/// Jordan pair at a defective eigenvalue: (H−z0)φ_cr = 0, (H−z0)φ_cra = φ_cr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JordanChain {
    pub z0: C64,
    pub phi_cr: Vec<C64>,
    pub phi_cra: Vec<C64>,
    pub residual_cr: f64,
    pub residual_cra: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigOptions {
    /// Normalized |φᵀφ| (or |yᵀx| for general matrices) below which a pair is flagged as an EP.
    pub ep_threshold: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            ep_threshold: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    matrix: ComplexMatrix,
    values: Vec<C64>,
    right: Vec<Vec<C64>>,
    left: Vec<Vec<C64>>,
    norms_a: Vec<PhaseNorm>,
    rigidity: Vec<f64>,
    ep_flag: Vec<bool>,
    jordan: Vec<Option<JordanChain>>,
    c_normalized: bool,
    options: EigOptions,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> C64 {
        self.values[k]
    }

    pub fn right(&self, k: usize) -> &[C64] {
        &self.right[k]
    }

    /// Left vector as a row: `cdot(left(k), right(l)) = δ_kl` for unflagged pairs.
    pub fn left(&self, k: usize) -> &[C64] {
        &self.left[k]
    }

    pub fn norm_a(&self, k: usize) -> PhaseNorm {
        self.norms_a[k]
    }

    pub fn norms_a(&self) -> &[PhaseNorm] {
        &self.norms_a
    }

    pub fn rigidity(&self, k: usize) -> f64 {
        self.rigidity[k]
    }

    pub fn rigidities(&self) -> &[f64] {
        &self.rigidity
    }

    pub fn ep_flag(&self, k: usize) -> bool {
        self.ep_flag[k]
    }

    pub fn any_ep(&self) -> bool {
        self.ep_flag.iter().any(|&f| f)
    }

    pub fn jordan(&self, k: usize) -> Option<&JordanChain> {
        self.jordan[k].as_ref()
    }

    pub fn is_c_normalized(&self) -> bool {
        self.c_normalized
    }

    /// ‖Hφ_k − z_kφ_k‖.
    pub fn residual(&self, k: usize) -> f64 {
        let hx = self.matrix.mul_vec(&self.right[k]);
        hx.iter()
            .zip(&self.right[k])
            .map(|(a, b)| (a - self.values[k] * b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Reorders pairs so that new index k holds old index `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n(), "permutation length");
        let pick = |v: &Vec<Vec<C64>>| perm.iter().map(|&p| v[p].clone()).collect();
        Self {
            matrix: self.matrix.clone(),
            values: perm.iter().map(|&p| self.values[p]).collect(),
            right: pick(&self.right),
            left: pick(&self.left),
            norms_a: perm.iter().map(|&p| self.norms_a[p]).collect(),
            rigidity: perm.iter().map(|&p| self.rigidity[p]).collect(),
            ep_flag: perm.iter().map(|&p| self.ep_flag[p]).collect(),
            jordan: perm.iter().map(|&p| self.jordan[p].clone()).collect(),
            c_normalized: self.c_normalized,
            options: self.options,
        }
    }

    /// Rotates each right vector so that ⟨prev_k|φ_k⟩ is real positive; left vectors
    /// are counter-rotated so the pairing is preserved. Used for general matrices
    /// where no c-gauge exists.
    pub fn align_phases(&mut self, prev: &EigenSystem) {
        for k in 0..self.n().min(prev.n()) {
            let ov = hdot(&prev.right[k], &self.right[k]);
            if ov.norm() == 0.0 {
                continue;
            }
            let ph = ov.conj() / ov.norm();
            for z in self.right[k].iter_mut() {
                *z *= ph;
            }
            for z in self.left[k].iter_mut() {
                *z /= ph;
            }
        }
    }
}

fn normalize_unit(v: &mut [C64]) {
    let nrm = norm2(v);
    if nrm == 0.0 {
        return;
    }
    let imax = largest_index(v);
    let ph = v[imax].conj() / v[imax].norm();
    for z in v.iter_mut() {
        *z = *z * ph / nrm;
    }
}

/// First index whose magnitude is within a relative 1e-9 of the maximum.
fn largest_index(v: &[C64]) -> usize {
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    v.iter()
        .position(|z| z.norm() >= m * (1.0 - 1e-9))
        .unwrap_or(0)
}

fn raw_eig(h: &ComplexMatrix) -> Result<(Vec<C64>, Vec<Vec<C64>>), LinalgError> {
    let n = h.n();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let (mut values, mut vectors) = match n {
        1 => (vec![h.get(0, 0)], vec![vec![one]]),
        2 if h.get(0, 1) == zero && h.get(1, 0) == zero => (
            vec![h.get(0, 0), h.get(1, 1)],
            vec![vec![one, zero], vec![zero, one]],
        ),
        2 => {
            let (a, b, c, d) = (h.get(0, 0), h.get(0, 1), h.get(1, 0), h.get(1, 1));
            let half = (a + d) * 0.5;
            let hd = (a - d) * 0.5;
            let z = (hd * hd + b * c).sqrt();
            let mut vals = Vec::with_capacity(2);
            let mut vecs = Vec::with_capacity(2);
            for s in [1.0, -1.0] {
                let lam = half + z * s;
                let c1 = [b, -hd + z * s];
                let c2 = [hd + z * s, c];
                let v = if norm2(&c1) >= norm2(&c2) { c1 } else { c2 };
                let v = if norm2(&v) == 0.0 {
                    if s > 0.0 {
                        [one, zero]
                    } else {
                        [zero, one]
                    }
                } else {
                    v
                };
                vals.push(lam);
                vecs.push(v.to_vec());
            }
            (vals, vecs)
        }
        _ => {
            let s = schur(n, h.data())?;
            let vals: Vec<C64> = (0..n).map(|k| s.t[k * n + k]).collect();
            let vecs = if h.symmetry() == Symmetry::Hermitian {
                (0..n)
                    .map(|k| (0..n).map(|i| s.z[i * n + k]).collect())
                    .collect()
            } else {
                schur_vectors(&s)
            };
            (vals, vecs)
        }
    };
    if h.symmetry() == Symmetry::Hermitian {
        for v in values.iter_mut() {
            v.im = 0.0;
        }
    }
    for v in vectors.iter_mut() {
        normalize_unit(v);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .re
            .total_cmp(&values[j].re)
            .then(values[i].im.total_cmp(&values[j].im))
    });
    let values = order.iter().map(|&i| values[i]).collect();
    let vectors = order.iter().map(|&i| vectors[i].clone()).collect();
    Ok((values, vectors))
}

pub fn eig(h: &ComplexMatrix) -> Result<EigenSystem, LinalgError> {
    eig_with(h, &EigOptions::default())
}

pub fn eig_with(h: &ComplexMatrix, opts: &EigOptions) -> Result<EigenSystem, LinalgError> {
    let n = h.n();
    let (values, right) = raw_eig(h)?;
    let mut left: Vec<Vec<C64>> = match h.symmetry() {
        Symmetry::ComplexSymmetric => right.clone(),
        Symmetry::Hermitian => right.iter().map(|v| v.iter().map(|z| z.conj()).collect()).collect(),
        Symmetry::General => {
            let (tvals, tvecs) = raw_eig(&h.transpose())?;
            let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
            let weight: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            cdot(&tvecs[j], &right[i]).norm() - 1e-6 * (values[i] - tvals[j]).norm() / scale
                        })
                        .collect()
                })
                .collect();
            let perm = max_weight_assignment(&weight);
            perm.iter().map(|&j| tvecs[j].clone()).collect()
        }
    };
    let mut norms_a = Vec::with_capacity(n);
    let mut rigidity = Vec::with_capacity(n);
    let mut ep_flag = Vec::with_capacity(n);
    for k in 0..n {
        let overlap = cdot(&left[k], &right[k]);
        let r = overlap.norm() / (norm2(&left[k]) * norm2(&right[k]));
        let flagged = h.symmetry() != Symmetry::Hermitian && r < opts.ep_threshold;
        if flagged {
            norms_a.push(PhaseNorm::Divergent);
        } else {
            for z in left[k].iter_mut() {
                *z /= overlap;
            }
            norms_a.push(PhaseNorm::Finite(1.0 / r));
        }
        rigidity.push(r.min(1.0));
        ep_flag.push(flagged);
    }
    let jordan = jordan_for_flagged(h, &values, &ep_flag);
    Ok(EigenSystem {
        matrix: h.clone(),
        values,
        right,
        left,
        norms_a,
        rigidity,
        ep_flag,
        jordan,
        c_normalized: false,
        options: *opts,
    })
}

fn jordan_for_flagged(h: &ComplexMatrix, values: &[C64], flags: &[bool]) -> Vec<Option<JordanChain>> {
    (0..values.len())
        .map(|k| {
            if !flags[k] {
                return None;
            }
            let nearest = (0..values.len())
                .filter(|&j| j != k)
                .min_by(|&a, &b| {
                    (values[a] - values[k])
                        .norm()
                        .total_cmp(&(values[b] - values[k]).norm())
                });
            let z0 = match nearest {
                Some(j) => (values[k] + values[j]) * 0.5,
                None => values[k],
            };
            jordan_chain(h, z0).ok()
        })
        .collect()
}

fn is_complex_symmetric(h: &ComplexMatrix) -> bool {
    match h.symmetry() {
        Symmetry::ComplexSymmetric => true,
        _ => {
            let tol = super::SYMMETRY_TOL * h.max_abs();
            (0..h.n()).all(|i| (i..h.n()).all(|j| (h.get(i, j) - h.get(j, i)).norm() <= tol))
        }
    }
}

/// Scales every vector to φᵀφ = 1 (principal square root) and fixes the residual sign,
/// either by continuity with `prev` (same index order) or by a phase convention on the
/// largest component. Pairs with vanishing c-norm are flagged instead.
pub fn c_normalize(sys: &EigenSystem, prev: Option<&EigenSystem>) -> Result<EigenSystem, LinalgError> {
    if !is_complex_symmetric(&sys.matrix) {
        return Err(LinalgError::NotComplexSymmetric);
    }
    let n = sys.n();
    let thr = sys.options.ep_threshold;
    let mut out = sys.clone();
    let mut newly_flagged = vec![false; n];
    for k in 0..n {
        let mut phi = sys.right[k].clone();
        let nrm = norm2(&phi);
        for z in phi.iter_mut() {
            *z /= nrm;
        }
        let cn = cdot(&phi, &phi);
        if cn.norm() < thr {
            normalize_unit(&mut phi);
            out.left[k] = phi.clone();
            out.right[k] = phi;
            out.norms_a[k] = PhaseNorm::Divergent;
            out.rigidity[k] = cn.norm();
            if !out.ep_flag[k] {
                newly_flagged[k] = true;
            }
            out.ep_flag[k] = true;
            continue;
        }
        let s = cn.sqrt();
        for z in phi.iter_mut() {
            *z /= s;
        }
        let flip = match prev.filter(|p| p.n() == n) {
            Some(p) => cdot(&p.right[k], &phi).re < 0.0,
            None => {
                let th = phi[largest_index(&phi)].arg();
                th < -1e-12 || th >= std::f64::consts::PI - 1e-12
            }
        };
        if flip {
            for z in phi.iter_mut() {
                *z = -*z;
            }
        }
        let a = norm2(&phi).powi(2) / cdot(&phi, &phi).norm();
        out.norms_a[k] = PhaseNorm::Finite(a);
        out.rigidity[k] = 1.0 / a;
        out.ep_flag[k] = false;
        out.jordan[k] = None;
        out.left[k] = phi.clone();
        out.right[k] = phi;
    }
    if newly_flagged.iter().any(|&f| f) {
        let chains = jordan_for_flagged(&out.matrix, &out.values, &newly_flagged);
        for (k, ch) in chains.into_iter().enumerate() {
            if newly_flagged[k] {
                out.jordan[k] = ch;
            }
        }
    }
    out.c_normalized = true;
    Ok(out)
}

/// Jordan chain of H at a (numerically) defective eigenvalue z0.
///
/// φ_cr spans the null space of H − z0 and φ_cra is the minimal-norm solution of
/// (H − z0)φ_cra = φ_cr, hence orthogonal to φ_cr.
pub fn jordan_chain(h: &ComplexMatrix, z0: C64) -> Result<JordanChain, LinalgError> {
    let m = h.shifted(z0);
    let s = svd(&m);
    let smax = s.sigma.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-8 * smax.max(1.0);
    let null: Vec<usize> = (0..s.sigma.len()).filter(|&j| s.sigma[j] <= tol).collect();
    match null.len() {
        0 => {
            let sigma_min = s.sigma.iter().cloned().fold(f64::INFINITY, f64::min);
            return Err(LinalgError::NotAnEigenvalue { sigma_min });
        }
        1 => {}
        g => {
            return Err(LinalgError::NotDefective {
                geometric_multiplicity: g,
            })
        }
    }
    let mut phi_cr = s.v[null[0]].clone();
    normalize_unit(&mut phi_cr);
    let n = phi_cr.len();
    let mut phi_cra = vec![C64::new(0.0, 0.0); n];
    for j in 0..s.sigma.len() {
        if s.sigma[j] <= tol {
            continue;
        }
        let coef = hdot(&s.u[j], &phi_cr) / s.sigma[j];
        for (x, v) in phi_cra.iter_mut().zip(&s.v[j]) {
            *x += coef * v;
        }
    }
    let r1 = norm2(&m.mul_vec(&phi_cr));
    let mpsi = m.mul_vec(&phi_cra);
    let r2 = mpsi
        .iter()
        .zip(&phi_cr)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if r2 > 1e-6 {
        return Err(LinalgError::NotDefective {
            geometric_multiplicity: 1,
        });
    }
    Ok(JordanChain {
        z0,
        phi_cr,
        phi_cra,
        residual_cr: r1,
        residual_cra: r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn t_sigma() -> ComplexMatrix {
        ComplexMatrix::new(
            2,
            vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(-1.0, 0.0)],
            Symmetry::ComplexSymmetric,
        )
        .unwrap()
    }

    #[test]
    fn defective_example_has_double_zero() {
        let sys = eig(&t_sigma()).unwrap();
        for k in 0..2 {
            assert!(sys.value(k).norm() < 1e-15);
            assert!(sys.ep_flag(k));
            assert!(sys.norm_a(k).is_divergent());
            let ch = sys.jordan(k).expect("chain at the EP");
            assert!(ch.residual_cr < 1e-12 && ch.residual_cra < 1e-12);
        }
    }

    #[test]
    fn diagonal_is_trivial() {
        let h = ComplexMatrix::diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let sys = eig(&h).unwrap();
        assert_eq!(sys.values(), &[c(1.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(sys.right(0), &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(sys.right(1), &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(sys.rigidity(0), 1.0);
    }

    #[test]
    fn jordan_chain_examples() {
        let ch = jordan_chain(&t_sigma(), c(0.0, 0.0)).unwrap();
        assert!(ch.residual_cr < 1e-12);
        assert!(ch.residual_cra < 1e-12);
        assert!(hdot(&ch.phi_cr, &ch.phi_cra).norm() < 1e-12);
        let z = ComplexMatrix::zeros(2);
        assert_eq!(
            jordan_chain(&z, c(0.0, 0.0)).unwrap_err(),
            LinalgError::NotDefective {
                geometric_multiplicity: 2
            }
        );
        let d = ComplexMatrix::diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(
            jordan_chain(&d, c(1.0, 0.0)).unwrap_err(),
            LinalgError::NotDefective {
                geometric_multiplicity: 1
            }
        );
        assert!(matches!(
            jordan_chain(&d, c(5.0, 0.0)),
            Err(LinalgError::NotAnEigenvalue { .. })
        ));
    }

    #[test]
    fn general_matrix_left_vectors_pair() {
        let h = ComplexMatrix::general(
            3,
            vec![
                c(1.0, 0.0),
                c(2.0, 1.0),
                c(0.0, 0.0),
                c(0.0, -1.0),
                c(3.0, 0.0),
                c(1.0, 0.0),
                c(0.5, 0.5),
                c(0.0, 0.0),
                c(-2.0, 1.0),
            ],
        )
        .unwrap();
        let sys = eig(&h).unwrap();
        for k in 0..3 {
            assert!(sys.residual(k) < 1e-12);
            for l in 0..3 {
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((cdot(sys.left(k), sys.right(l)) - c(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn c_normalize_real_symmetric_is_rigid() {
        let h = ComplexMatrix::from_rows(
            &[vec![c(1.0, 0.0), c(0.5, 0.0)], vec![c(0.5, 0.0), c(-1.0, 0.0)]],
            Symmetry::Hermitian,
        )
        .unwrap();
        let sys = c_normalize(&eig(&h).unwrap(), None).unwrap();
        for k in 0..2 {
            assert!((sys.norm_a(k).value() - 1.0).abs() < 1e-14);
            assert!((sys.rigidity(k) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn c_normalize_rejects_general() {
        let h = ComplexMatrix::general(2, vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
            .unwrap();
        let sys = eig(&h).unwrap();
        assert_eq!(c_normalize(&sys, None).unwrap_err(), LinalgError::NotComplexSymmetric);
    }
}
