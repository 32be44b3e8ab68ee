//! Closed-form physics of the 2×2 problem H = [[ε₁, ω], [ω, ε₂]].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    c_normalize, cdot, eig, hdot, max_weight_assignment, ComplexMatrix, EigenSystem, LinalgError,
    Symmetry, C64,
};

/// Magnitude used in place of divergent mixing coefficients at an EP.
pub const B_CAP: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwoLevelError {
    #[error("degenerate input: eps1 == eps2")]
    DegenerateInput,
    #[error("model is not at an exceptional point (max rigidity {max_rigidity:.3e})")]
    NotAtEP { max_rigidity: f64 },
    #[error("model is at an exceptional point")]
    AtExceptionalPoint,
    #[error("minimum gap not bracketed by the parameter grid")]
    GridTooCoarse,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn i() -> C64 {
    C64::new(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelModel {
    pub eps1: C64,
    pub eps2: C64,
    pub omega: C64,
}

impl TwoLevelModel {
    pub fn new(eps1: C64, eps2: C64, omega: C64) -> Self {
        Self { eps1, eps2, omega }
    }

    /// ε_k = e_k − iγ_k/2 with γ_k ≥ 0.
    pub fn from_widths(e1: f64, gamma1: f64, e2: f64, gamma2: f64, omega: C64) -> Result<Self, TwoLevelError> {
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(TwoLevelError::InvalidParameter(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(Self {
            eps1: C64::new(e1, -0.5 * gamma1),
            eps2: C64::new(e2, -0.5 * gamma2),
            omega,
        })
    }

    pub fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::new(
            2,
            vec![self.eps1, self.omega, self.omega, self.eps2],
            Symmetry::ComplexSymmetric,
        )
        .expect("2x2 complex-symmetric matrix from finite parameters")
    }

    pub fn scale(&self) -> f64 {
        self.eps1.norm().max(self.eps2.norm()).max(1.0)
    }
}

/// (ε₊, ε₋, Z) with Z = ½√((ε₁−ε₂)² + 4ω²), principal root.
pub fn eigenvalues(m: &TwoLevelModel) -> (C64, C64, C64) {
    let d = m.eps1 - m.eps2;
    let z = 0.5 * (d * d + 4.0 * m.omega * m.omega).sqrt();
    let mid = 0.5 * (m.eps1 + m.eps2);
    (mid + z, mid - z, z)
}

/// Couplings ω± = ±i(ε₁−ε₂)/2 at which the two levels coalesce.
pub fn ep_locations(eps1: C64, eps2: C64) -> Result<(C64, C64), TwoLevelError> {
    if eps1 == eps2 {
        return Err(TwoLevelError::DegenerateInput);
    }
    let h = 0.5 * (eps1 - eps2);
    Ok((i() * h, -i() * h))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoalescenceReport {
    /// Least-squares coefficient r with φ₁ ≈ r·φ₂.
    pub ratio: C64,
    /// φ₁[j]/φ₂[j] per component.
    pub componentwise: Vec<C64>,
    /// +1 if the ratio is closest to +i, −1 for −i.
    pub sign: i8,
    /// |ratio ∓ i|.
    pub deviation: f64,
    pub within_tolerance: bool,
    pub max_rigidity: f64,
}

/// Threshold on the phase rigidity above which a model is not considered near an EP.
const NEAR_EP_RIGIDITY: f64 = 0.05;

/// Checks φ₁ → ±iφ₂ for the c-normalized eigenvectors of a model at (or very near) an EP.
pub fn coalescence_relation_check(m: &TwoLevelModel) -> Result<CoalescenceReport, TwoLevelError> {
    let sys = eig(&m.matrix())?;
    let max_rigidity = sys.rigidities().iter().cloned().fold(0.0, f64::max);
    if sys.any_ep() {
        // At the EP itself both eigenvectors coincide with φ_cr; the relation is carried
        // by its components, φ_cr ∝ (1, ±i).
        let phi = sys
            .jordan(0)
            .map(|j| j.phi_cr.clone())
            .unwrap_or_else(|| sys.right(0).to_vec());
        let t = phi[1] / phi[0];
        let ratio = 2.0 * i() * t.im / (1.0 + t.norm_sqr());
        return Ok(report(ratio, vec![ratio; 2], max_rigidity));
    }
    if max_rigidity > NEAR_EP_RIGIDITY {
        return Err(TwoLevelError::NotAtEP { max_rigidity });
    }
    let sys = c_normalize(&sys, None)?;
    let (p1, p2) = (sys.right(0), sys.right(1));
    let ratio = hdot(p2, p1) / hdot(p2, p2);
    let componentwise = p1.iter().zip(p2).map(|(a, b)| a / b).collect();
    Ok(report(ratio, componentwise, max_rigidity))
}

fn report(ratio: C64, componentwise: Vec<C64>, max_rigidity: f64) -> CoalescenceReport {
    let dp = (ratio - i()).norm();
    let dm = (ratio + i()).norm();
    let (sign, deviation) = if dp <= dm { (1, dp) } else { (-1, dm) };
    CoalescenceReport {
        ratio,
        componentwise,
        sign,
        deviation,
        within_tolerance: deviation <= 1e-6,
        max_rigidity,
    }
}

/// Gain/loss model [[e − iγ/2, ω], [ω, e + iγ/2]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtTwoLevelModel {
    e: f64,
    gamma: f64,
    omega: f64,
}

impl PtTwoLevelModel {
    pub fn new(e: f64, gamma: f64, omega: f64) -> Result<Self, TwoLevelError> {
        if !e.is_finite() || !omega.is_finite() {
            return Err(TwoLevelError::InvalidParameter("e and omega must be finite".into()));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(TwoLevelError::InvalidParameter("gamma must be finite and >= 0".into()));
        }
        Ok(Self { e, gamma, omega })
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let w = C64::new(self.omega, 0.0);
        ComplexMatrix::new(
            2,
            vec![C64::new(self.e, -0.5 * self.gamma), w, w, C64::new(self.e, 0.5 * self.gamma)],
            Symmetry::ComplexSymmetric,
        )
        .expect("finite PT parameters")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PtSpectrum {
    pub values: [C64; 2],
    pub is_broken: bool,
}

pub fn pt_eigenvalues(m: &PtTwoLevelModel) -> PtSpectrum {
    // (2ω−γ)(2ω+γ) keeps the sign exact at the threshold.
    let disc = (2.0 * m.omega - m.gamma) * (2.0 * m.omega + m.gamma);
    let e = m.e;
    if disc >= 0.0 {
        let r = 0.5 * disc.sqrt();
        PtSpectrum {
            values: [C64::new(e + r, 0.0), C64::new(e - r, 0.0)],
            is_broken: false,
        }
    } else {
        let r = 0.5 * (-disc).sqrt();
        PtSpectrum {
            values: [C64::new(e, r), C64::new(e, -r)],
            is_broken: true,
        }
    }
}

/// Largest componentwise mismatch of the source-term expansion
/// (H₀ − z_n)φ_n = Σ_k ⟨φ_k|W|φ_n⟩ {A_k φ_k + Σ_{l≠k} B_k^l φ_l}
/// with H₀ = diag(ε₁, ε₂), H = H₀ − W and c-normalized φ.
pub fn nonlinear_source_residual(m: &TwoLevelModel) -> Result<f64, TwoLevelError> {
    let sys = c_normalize(&eig(&m.matrix())?, None)?;
    if sys.any_ep() {
        return Err(TwoLevelError::AtExceptionalPoint);
    }
    let w = [[C64::new(0.0, 0.0), -m.omega], [-m.omega, C64::new(0.0, 0.0)]];
    let h0 = [m.eps1, m.eps2];
    let apply_w = |v: &[C64]| [w[0][0] * v[0] + w[0][1] * v[1], w[1][0] * v[0] + w[1][1] * v[1]];
    let mut worst = 0.0f64;
    for nn in 0..2 {
        let phi_n = sys.right(nn);
        let z = sys.value(nn);
        let wphi = apply_w(phi_n);
        let mut rhs = [C64::new(0.0, 0.0); 2];
        for k in 0..2 {
            let pk = sys.right(k);
            let amp = hdot(pk, &wphi);
            for l in 0..2 {
                let coef = hdot(pk, sys.right(l));
                for (r, x) in rhs.iter_mut().zip(sys.right(l)) {
                    *r += amp * coef * x;
                }
            }
        }
        for j in 0..2 {
            let lhs = (h0[j] - z) * phi_n[j];
            worst = worst.max((lhs - rhs[j]).norm());
        }
    }
    Ok(worst)
}

/// Phase of ⟨φ₁|φ₂⟩ for the c-normalized eigenvectors.
pub fn overlap_phase(m: &TwoLevelModel) -> Result<f64, TwoLevelError> {
    let sys = c_normalize(&eig(&m.matrix())?, None)?;
    if sys.any_ep() {
        return Err(TwoLevelError::AtExceptionalPoint);
    }
    Ok(hdot(sys.right(0), sys.right(1)).arg())
}

/// e(a) = intercept + slope·a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub intercept: f64,
    pub slope: f64,
}

impl Affine {
    pub fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    pub fn at(&self, a: f64) -> f64 {
        self.intercept + self.slope * a
    }
}

/// Two levels with energies linear in `a`, fixed widths and a constant coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidedCrossingModel {
    e1: Affine,
    e2: Affine,
    gamma1: f64,
    gamma2: f64,
    omega: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    FreeCrossing,
    ExceptionalPoint,
    AvoidedCrossing,
    DiscreteAvoided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingClassification {
    pub kind: CrossingKind,
    /// Critical widths (γ₁^cr, γ₂^cr) along the ray s·(γ₁⁰, γ₂⁰), when one exists.
    pub gamma_cr: Option<(f64, f64)>,
    pub a_min: f64,
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    /// δ_i = |b_ii|² − |b_ij|² per eigenstate i.
    pub delta: [f64; 2],
    /// |b_ij|², rows = eigenstates after assignment to unperturbed states.
    pub b_sq: [[f64; 2]; 2],
    /// Set at an EP, where b diverges and is reported capped at [`B_CAP`].
    pub flagged: bool,
}

impl AvoidedCrossingModel {
    pub fn new(e1: Affine, e2: Affine, gamma1: f64, gamma2: f64, omega: C64) -> Result<Self, TwoLevelError> {
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(TwoLevelError::InvalidParameter(format!("{name} must be finite and >= 0")));
            }
        }
        if e1.slope == e2.slope {
            return Err(TwoLevelError::InvalidParameter("e1 and e2 must not be parallel".into()));
        }
        Ok(Self {
            e1,
            e2,
            gamma1,
            gamma2,
            omega,
        })
    }

    pub fn e1(&self) -> Affine {
        self.e1
    }

    pub fn e2(&self) -> Affine {
        self.e2
    }

    pub fn gammas(&self) -> (f64, f64) {
        (self.gamma1, self.gamma2)
    }

    pub fn omega(&self) -> C64 {
        self.omega
    }

    pub fn with_widths(&self, gamma1: f64, gamma2: f64) -> Result<Self, TwoLevelError> {
        Self::new(self.e1, self.e2, gamma1, gamma2, self.omega)
    }

    pub fn with_omega(&self, omega: C64) -> Self {
        Self { omega, ..*self }
    }

    /// Parameter at which the unperturbed energies intersect.
    pub fn a_cr(&self) -> f64 {
        (self.e2.intercept - self.e1.intercept) / (self.e1.slope - self.e2.slope)
    }

    pub fn at(&self, a: f64) -> TwoLevelModel {
        TwoLevelModel {
            eps1: C64::new(self.e1.at(a), -0.5 * self.gamma1),
            eps2: C64::new(self.e2.at(a), -0.5 * self.gamma2),
            omega: self.omega,
        }
    }

    fn gap(&self, a: f64) -> C64 {
        2.0 * eigenvalues(&self.at(a)).2
    }

    /// Location and size of the minimum of |z₁ − z₂| over the grid.
    fn min_gap(&self, grid: &[f64]) -> Result<(f64, f64), TwoLevelError> {
        if grid.len() < 3 {
            return Err(TwoLevelError::GridTooCoarse);
        }
        let gaps: Vec<f64> = grid.iter().map(|&a| self.gap(a).norm()).collect();
        let imin = (0..gaps.len())
            .min_by(|&x, &y| gaps[x].total_cmp(&gaps[y]))
            .unwrap_or(0);
        if imin == 0 || imin == grid.len() - 1 {
            return Err(TwoLevelError::GridTooCoarse);
        }
        let f = |a: f64| self.gap(a).norm();
        let (a, g) = golden_min(f, grid[imin - 1], grid[imin + 1]);
        Ok(if g <= gaps[imin] { (a, g) } else { (grid[imin], gaps[imin]) })
    }

    /// At the min-gap point, do the real parts come closer than the imaginary parts?
    fn energies_cross(&self, grid: &[f64]) -> Result<bool, TwoLevelError> {
        let (a, _) = self.min_gap(grid)?;
        let g = self.gap(a);
        Ok(g.re.abs() < g.im.abs())
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Tolerance of the critical-width bisection.
pub const GAMMA_CR_TOL: f64 = 1e-10;

/// Assigns the model to one of the four crossing regimes and reports the critical widths
/// found by bisection along the ray s·(γ₁⁰, γ₂⁰).
pub fn classify_crossing(m: &AvoidedCrossingModel, a_grid: &[f64]) -> Result<CrossingClassification, TwoLevelError> {
    let (a_min, min_gap) = m.min_gap(a_grid)?;
    let scale = m.at(a_min).scale();
    if m.gamma1 == 0.0 && m.gamma2 == 0.0 {
        return Ok(CrossingClassification {
            kind: CrossingKind::DiscreteAvoided,
            gamma_cr: None,
            a_min,
            min_gap,
        });
    }
    let at_scale = |s: f64| m.with_widths(s * m.gamma1, s * m.gamma2);
    let gamma_cr = if at_scale(0.0)?.energies_cross(a_grid)? {
        // Levels cross already without widths (ω = 0): every width is beyond critical.
        Some((0.0, 0.0))
    } else {
        let mut hi = 1.0;
        let mut found = false;
        for _ in 0..200 {
            if at_scale(hi)?.energies_cross(a_grid)? {
                found = true;
                break;
            }
            hi *= 2.0;
        }
        if found {
            let mut lo = 0.0;
            let gmax = m.gamma1.max(m.gamma2);
            while (hi - lo) * gmax > GAMMA_CR_TOL {
                let mid = 0.5 * (lo + hi);
                if at_scale(mid)?.energies_cross(a_grid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let s = 0.5 * (lo + hi);
            Some((s * m.gamma1, s * m.gamma2))
        } else {
            None
        }
    };
    let near_cr = match gamma_cr {
        Some((g1, g2)) => (m.gamma1 - g1).abs().max((m.gamma2 - g2).abs()) <= GAMMA_CR_TOL * m.gamma1.max(m.gamma2).max(1.0),
        None => false,
    };
    let kind = if near_cr || min_gap < 1e-8 * scale {
        CrossingKind::ExceptionalPoint
    } else if m.energies_cross(a_grid)? {
        CrossingKind::FreeCrossing
    } else {
        CrossingKind::AvoidedCrossing
    };
    Ok(CrossingClassification {
        kind,
        gamma_cr,
        a_min,
        min_gap,
    })
}

/// δ = |b_ii|² − |b_ij|² with b_ij = ⟨Φ_j⁰*|Φ_i⟩; the unperturbed basis is the unit vectors.
pub fn delta_diagnostic(m: &AvoidedCrossingModel, a: f64) -> Result<DeltaReport, TwoLevelError> {
    let sys: EigenSystem = eig(&m.at(a).matrix())?;
    if sys.any_ep() {
        return Ok(DeltaReport {
            delta: [0.0; 2],
            b_sq: [[B_CAP * B_CAP; 2]; 2],
            flagged: true,
        });
    }
    let sys = c_normalize(&sys, None)?;
    let weight: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| sys.right(i)[j].norm()).collect()).collect();
    let perm = max_weight_assignment(&weight);
    let mut b_sq = [[0.0; 2]; 2];
    let mut delta = [0.0; 2];
    for i in 0..2 {
        let own = perm[i];
        let other = 1 - own;
        let bi = sys.right(i);
        b_sq[i] = [bi[own].norm_sqr(), bi[other].norm_sqr()];
        delta[i] = b_sq[i][0] - b_sq[i][1];
    }
    debug_assert!((cdot(sys.right(0), sys.right(0)) - 1.0).norm() < 1e-9);
    Ok(DeltaReport {
        delta,
        b_sq,
        flagged: false,
    })
}
