use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pv::{check_threshold, subtracted};
use super::{OpenSystemError, OpenSystemModel};
use crate::linalg::{c_normalize, cdot, eig, hdot, max_weight_assignment, norm2, ComplexMatrix, EigenSystem, Symmetry, C64};
use crate::two_level::B_CAP;

/// H_eff(E) = H_B + shift(E) − (i/2) Σ_c γ̂^c(E) γ̂^c(E)ᵀ.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    pub energy: f64,
    pub matrix: ComplexMatrix,
    /// (1/2π) Σ_c P∫ γ̂_i^c γ̂_j^c/(E − E′) dE′.
    pub real_shift: Vec<Vec<f64>>,
    /// Rank-1 factors γ̂^c(E) of the width term, one per channel; empty outside the window.
    pub channels: Vec<Vec<f64>>,
}

impl EffectiveHamiltonian {
    pub fn in_window(&self) -> bool {
        !self.channels.is_empty()
    }

    /// −(1/2) Σ_c γ̂_i^c γ̂_j^c, the imaginary part of the matrix.
    pub fn width_term(&self) -> Vec<Vec<f64>> {
        let n = self.matrix.n();
        let mut w = vec![vec![0.0; n]; n];
        for g in &self.channels {
            for i in 0..n {
                for j in 0..n {
                    w[i][j] -= 0.5 * g[i] * g[j];
                }
            }
        }
        w
    }
}

pub fn assemble_heff(m: &OpenSystemModel, e: f64) -> Result<EffectiveHamiltonian, OpenSystemError> {
    let window = m.window();
    let size = m.grid_size();
    check_threshold(window, size, e)?;
    let n = m.n_states();
    let nodes = m.grid();
    let h = 0.25 * (window.1 - window.0) / (size - 1) as f64;
    let (g0, gp, gm) = (m.gamma_hat(e), m.gamma_hat(e + h), m.gamma_hat(e - h));
    let mut shift = vec![vec![0.0; n]; n];
    let mut fvals = vec![0.0; size];
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for c in 0..m.n_channels() {
                for (k, gv) in m.grid_values.iter().enumerate() {
                    fvals[k] = gv[i][c] * gv[j][c];
                }
                let fe = g0[i][c] * g0[j][c];
                let dfe = (gp[i][c] * gp[j][c] - gm[i][c] * gm[j][c]) / (2.0 * h);
                s += subtracted(&fvals, &nodes, fe, dfe, window, e);
            }
            shift[i][j] = s / (2.0 * PI);
            shift[j][i] = shift[i][j];
        }
    }
    let channels: Vec<Vec<f64>> = if m.in_window(e) {
        (0..m.n_channels()).map(|c| (0..n).map(|k| g0[k][c]).collect()).collect()
    } else {
        Vec::new()
    };
    let hb = m.h_b();
    let mut data = hb.data().to_vec();
    for i in 0..n {
        for j in 0..n {
            let w: f64 = channels.iter().map(|g| g[i] * g[j]).sum();
            data[i * n + j] += C64::new(shift[i][j], -0.5 * w);
        }
    }
    let sym = if channels.is_empty() { Symmetry::Hermitian } else { Symmetry::ComplexSymmetric };
    Ok(EffectiveHamiltonian {
        energy: e,
        matrix: ComplexMatrix::new(n, data, sym)?,
        real_shift: shift,
        channels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceOptions {
    pub damping: f64,
    /// Relative to the model scale.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceState {
    pub k: usize,
    /// Self-consistent real energy at which H_eff was evaluated.
    pub energy: f64,
    /// z_k = E_k − (i/2)Γ_k.
    pub z: C64,
    pub phi: Vec<C64>,
    /// γ_k^c = Σ_i Φ_k,i γ̂_i^c(E).
    pub gamma_c: Vec<C64>,
    pub converged: bool,
    pub iterations: usize,
    /// |Re z_k(E) − E| at the last iterate.
    pub residual: f64,
    pub in_window: bool,
}

impl ResonanceState {
    pub fn width(&self) -> f64 {
        -2.0 * self.z.im
    }

    pub fn check(&self) -> Result<(), OpenSystemError> {
        if self.converged {
            Ok(())
        } else {
            Err(OpenSystemError::SelfConsistencyFailure {
                state: self.k,
                residual: self.residual,
            })
        }
    }
}

fn normalized_overlap(a: &[C64], b: &[C64]) -> f64 {
    hdot(a, b).norm() / (norm2(a) * norm2(b))
}

fn track(sys: &EigenSystem, reference: &[C64]) -> usize {
    (0..sys.n())
        .max_by(|&a, &b| normalized_overlap(reference, sys.right(a)).total_cmp(&normalized_overlap(reference, sys.right(b))))
        .unwrap_or(0)
}

fn diagonalize(heff: &EffectiveHamiltonian) -> Result<EigenSystem, OpenSystemError> {
    Ok(c_normalize(&eig(&heff.matrix)?, None)?)
}

/// Damped fixed point on Re z for one state, following `reference` by overlap.
fn iterate(
    m: &OpenSystemModel,
    k: usize,
    mut e: f64,
    mut reference: Vec<C64>,
    fallback: (C64, &[C64]),
    opts: &ResonanceOptions,
) -> Result<ResonanceState, OpenSystemError> {
    let tol = opts.tol * m.scale();
    let mut last: Option<(EffectiveHamiltonian, EigenSystem, usize)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        iterations = it;
        let Ok(heff) = assemble_heff(m, e) else { break };
        let sys = diagonalize(&heff)?;
        let j = track(&sys, &reference);
        let re = sys.value(j).re;
        residual = (re - e).abs();
        reference = sys.right(j).to_vec();
        last = Some((heff, sys, j));
        if residual < tol {
            converged = true;
            break;
        }
        e = (1.0 - opts.damping) * e + opts.damping * re;
    }
    Ok(match last {
        Some((heff, sys, j)) => {
            let phi = sys.right(j).to_vec();
            let gamma_c = heff
                .channels
                .iter()
                .map(|g| phi.iter().zip(g).map(|(p, x)| p * x).sum())
                .collect();
            let mut z = sys.value(j);
            if !heff.in_window() {
                z.im = 0.0;
            }
            ResonanceState {
                k,
                energy: heff.energy,
                z,
                phi,
                gamma_c,
                converged,
                iterations,
                residual,
                in_window: heff.in_window(),
            }
        }
        None => ResonanceState {
            k,
            energy: e,
            z: fallback.0,
            phi: fallback.1.to_vec(),
            gamma_c: Vec::new(),
            converged: false,
            iterations,
            residual,
            in_window: m.in_window(e),
        },
    })
}

/// Solves z_k = eigenvalue of H_eff(E) at E = Re z_k for each state separately.
///
/// The real energy is iterated with damping; the width is taken at the converged energy.
/// A state that fails to converge is returned with `converged = false` and its last iterate.
/// States that land on the same pole are redistributed over the eigenvectors of H_eff at
/// that energy by their bound-state overlaps and iterated again.
pub fn solve_resonances(m: &OpenSystemModel, opts: &ResonanceOptions) -> Result<Vec<ResonanceState>, OpenSystemError> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) || !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(OpenSystemError::InvalidModel("invalid self-consistency options".into()));
    }
    let bound = c_normalize(&eig(&m.h_b())?, None)?;
    let n = m.n_states();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let fallback = (bound.value(k), bound.right(k));
        out.push(iterate(m, k, bound.value(k).re, bound.right(k).to_vec(), fallback, opts)?);
    }
    let same = 1e-8 * m.scale();
    let mut done = vec![false; n];
    for a in 0..n {
        if done[a] || !out[a].converged {
            continue;
        }
        let group: Vec<usize> = (a..n)
            .filter(|&b| out[b].converged && (out[b].z - out[a].z).norm() < same && (out[b].energy - out[a].energy).abs() < same)
            .collect();
        group.iter().for_each(|&b| done[b] = true);
        if group.len() < 2 {
            continue;
        }
        let e = out[a].energy;
        let sys = diagonalize(&assemble_heff(m, e)?)?;
        let weight: Vec<Vec<f64>> = group
            .iter()
            .map(|&b| (0..n).map(|j| normalized_overlap(bound.right(b), sys.right(j))).collect())
            .collect();
        let mut padded = weight.clone();
        padded.resize(n, vec![0.0; n]);
        let perm = max_weight_assignment(&padded);
        for (row, &b) in group.iter().enumerate() {
            let fallback = (bound.value(b), bound.right(b));
            out[b] = iterate(m, b, e, sys.right(perm[row]).to_vec(), fallback, opts)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingBasis {
    /// Eigenvectors of H_eff with its off-diagonal couplings removed, i.e. unit vectors.
    UnperturbedNoncoupled,
    /// Eigenvectors of the Hermitian H_B.
    BoundBasis,
}

/// Real orthonormal basis vectors for the chosen mixing basis.
pub fn basis_vectors(basis: MixingBasis, h_b: &ComplexMatrix) -> Result<Vec<Vec<C64>>, OpenSystemError> {
    let n = h_b.n();
    match basis {
        MixingBasis::UnperturbedNoncoupled => Ok((0..n)
            .map(|j| (0..n).map(|i| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect()),
        MixingBasis::BoundBasis => {
            let sys = eig(h_b)?;
            Ok((0..n).map(|j| sys.right(j).to_vec()).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    /// coefficients[i][j] = ⟨Φ_j^{0*}|Φ_i⟩, magnitudes capped at the divergence cap.
    pub coefficients: Vec<Vec<C64>>,
    /// max_ij |Σ_k b_ik b_jk − δ_ij|, computed before capping.
    pub sum_rule_residual: f64,
    pub max_abs: f64,
    /// Set when a state is flagged as an EP or a coefficient exceeded the cap.
    pub at_exceptional_point: bool,
}

/// Mixing of the c-normalized eigenvectors of `sys` in a real orthonormal basis.
pub fn mixing_coefficients(sys: &EigenSystem, basis: &[Vec<C64>]) -> MixingReport {
    let n = sys.n();
    let raw: Vec<Vec<C64>> = (0..n)
        .map(|i| basis.iter().map(|b| cdot(b, sys.right(i))).collect())
        .collect();
    let mut residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s: C64 = (0..basis.len()).map(|k| raw[i][k] * raw[j][k]).sum();
            let d = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((s - d).norm());
        }
    }
    let max_abs = raw.iter().flatten().map(|b| b.norm()).fold(0.0, f64::max);
    let capped = max_abs > B_CAP;
    let coefficients = raw
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|b| if b.norm() > B_CAP { b * (B_CAP / b.norm()) } else { b })
                .collect()
        })
        .collect();
    MixingReport {
        coefficients,
        sum_rule_residual: residual,
        max_abs,
        at_exceptional_point: capped || sys.any_ep(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorExpansion {
    /// c_kE = γ_k^c / (√(2π)(E − z_k)).
    pub coefficients: Vec<C64>,
    /// |Σ c²| / Σ |c|², in [0, 1].
    pub rho: f64,
}

/// Expansion coefficients of the interior scattering wavefunction and their phase rigidity.
pub fn interior_rigidity(states: &[ResonanceState], e: f64, channel: usize) -> InteriorExpansion {
    let coefficients: Vec<C64> = states
        .iter()
        .map(|s| {
            let g = s.gamma_c.get(channel).copied().unwrap_or_default();
            g / ((2.0 * PI).sqrt() * (C64::new(e, 0.0) - s.z))
        })
        .collect();
    let num: C64 = coefficients.iter().map(|c| c * c).sum();
    let den: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    let rho = if den > 0.0 { (num.norm() / den).min(1.0) } else { 1.0 };
    InteriorExpansion { coefficients, rho }
}

#[cfg(test)]
mod tests {
    use super::super::CouplingProfile;
    use super::*;

    fn single(g: f64) -> OpenSystemModel {
        OpenSystemModel::new(
            vec![0.0],
            None,
            CouplingProfile::Constant {
                amplitudes: vec![vec![g]],
            },
            (-1.0, 1.0),
            201,
        )
        .unwrap()
    }

    #[test]
    fn zero_coupling_is_closed() {
        let m = OpenSystemModel::new(
            vec![-0.3, 0.4],
            Some(vec![vec![0.0, 0.1], vec![0.1, 0.0]]),
            CouplingProfile::Constant {
                amplitudes: vec![vec![0.0], vec![0.0]],
            },
            (-1.0, 1.0),
            101,
        )
        .unwrap();
        let h = assemble_heff(&m, 0.1).unwrap();
        assert_eq!(h.matrix, m.h_b().with_symmetry(Symmetry::ComplexSymmetric).unwrap());
        let states = solve_resonances(&m, &ResonanceOptions::default()).unwrap();
        for s in &states {
            assert!(s.converged && s.iterations == 1);
            assert_eq!(s.width(), 0.0);
        }
    }

    #[test]
    fn single_level_at_centre() {
        let g = 0.3;
        let h = assemble_heff(&single(g), 0.0).unwrap();
        assert!(h.real_shift[0][0].abs() < 1e-14);
        assert!((h.matrix.get(0, 0) - C64::new(0.0, -0.5 * g * g)).norm() < 1e-14);
        let s = &solve_resonances(&single(g), &ResonanceOptions::default()).unwrap()[0];
        assert!((s.width() - g * g).abs() < 1e-12);
        assert!((s.gamma_c[0].norm() - g).abs() < 1e-12);
    }

    #[test]
    fn outside_window_is_real_symmetric() {
        let h = assemble_heff(&single(0.3), 2.0).unwrap();
        assert!(!h.in_window());
        assert_eq!(h.matrix.symmetry(), Symmetry::Hermitian);
        assert!(h.matrix.data().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn single_state_interior_rigidity_is_one() {
        let states = solve_resonances(&single(0.3), &ResonanceOptions::default()).unwrap();
        for e in [-0.5, 0.0, 0.2] {
            assert!((interior_rigidity(&states, e, 0).rho - 1.0).abs() < 1e-14);
        }
    }
}
