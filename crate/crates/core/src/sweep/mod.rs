//! Eigenpair continuation over parameters: open sweeps with event detection,
//! exceptional-point localization and encircling with adiabatic transport.

mod encircle;
mod events;
mod locate;
mod models;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    c_normalize, cdot, eig_with, hdot, max_weight_assignment, norm2, ComplexMatrix, EigOptions,
    EigenSystem, LinalgError,
};

pub use encircle::{encircle, CycleRecord, CycleReport, EncircleSpec, Orientation};
pub use events::{Event, EventKind};
pub use locate::{locate_ep, ConvergedBy, EpLocation, LocateOptions};
pub use models::{AffineFamily, AvoidedCrossingSweep};
pub use run::{sweep, SweepResult, SweepRow, SweepSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("parameter '{path}' is not defined for {model}")]
    UnknownParameter { path: ParamPath, model: &'static str },
    #[error("invalid parameter value: {0}")]
    InvalidParameter(String),
    #[error("eigenpair matching ambiguous at {param}: best overlap {overlap:.3}")]
    MatchingAmbiguous { param: f64, overlap: f64 },
    #[error("transport ambiguous at theta = {theta:.6}: best overlap {overlap:.3}")]
    TransportAmbiguous { theta: f64, overlap: f64 },
    #[error("EP search did not converge; best point ({p1}, {p2}) with gap {gap:.3e}")]
    NoConvergence { p1: f64, p2: f64, gap: f64 },
    #[error("EP search stalled at ({p1}, {p2}) with gap {gap:.3e} above tolerance")]
    SaddleRejected { p1: f64, p2: f64, gap: f64 },
    #[error("contour encloses {count} exceptional points")]
    SecondEpInside { count: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Named scalar parameter of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParamPath {
    A,
    OmegaRe,
    OmegaIm,
    Eps1Re,
    Eps1Im,
    Eps2Re,
    Eps2Im,
    Gamma,
    Gamma1,
    Gamma2,
    E,
    Alpha,
    P1,
    P2,
}

const PATHS: [(ParamPath, &str); 14] = [
    (ParamPath::A, "a"),
    (ParamPath::OmegaRe, "omega.re"),
    (ParamPath::OmegaIm, "omega.im"),
    (ParamPath::Eps1Re, "eps1.re"),
    (ParamPath::Eps1Im, "eps1.im"),
    (ParamPath::Eps2Re, "eps2.re"),
    (ParamPath::Eps2Im, "eps2.im"),
    (ParamPath::Gamma, "gamma"),
    (ParamPath::Gamma1, "gamma1"),
    (ParamPath::Gamma2, "gamma2"),
    (ParamPath::E, "e"),
    (ParamPath::Alpha, "alpha"),
    (ParamPath::P1, "p1"),
    (ParamPath::P2, "p2"),
];

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = PATHS.iter().find(|(p, _)| p == self).map(|(_, s)| *s).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for ParamPath {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PATHS
            .iter()
            .find(|(_, name)| *name == s)
            .map(|(p, _)| *p)
            .ok_or_else(|| {
                let all: Vec<&str> = PATHS.iter().map(|(_, n)| *n).collect();
                format!("unknown parameter path '{s}' (expected one of {})", all.join(", "))
            })
    }
}

impl TryFrom<String> for ParamPath {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ParamPath> for String {
    fn from(p: ParamPath) -> String {
        p.to_string()
    }
}

/// A model whose Hamiltonian depends on named real parameters.
pub trait ParametricModel: Clone + Send + Sync {
    fn name(&self) -> &'static str;
    fn matrix(&self) -> Result<ComplexMatrix, SweepError>;
    fn get(&self, path: ParamPath) -> Result<f64, SweepError>;
    fn set(&mut self, path: ParamPath, value: f64) -> Result<(), SweepError>;

    /// Energy window inside which a vanishing width marks a bound state in the continuum.
    fn coupling_window(&self) -> Option<(f64, f64)> {
        None
    }

    /// Closed-form EP positions in the (p1, p2) plane, when known.
    fn ep_candidates(&self, _p1: ParamPath, _p2: ParamPath) -> Option<Vec<(f64, f64)>> {
        None
    }
}

/// Tolerances and limits shared by sweeps, EP search and encircling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Energy/width crossing band, relative to the spectral scale.
    pub gap_tol: f64,
    /// EP-candidate gap, relative to the spectral scale.
    pub ep_gap_tol: f64,
    /// BIC width threshold, relative to the largest width in the sweep.
    pub bic_tol: f64,
    /// Each refinement level halves the step; 3 levels = 8× finer.
    pub max_refine_depth: u32,
    pub min_overlap: f64,
    pub workers: usize,
    pub ep_threshold: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            ep_gap_tol: 1e-10,
            bic_tol: 1e-10,
            max_refine_depth: 3,
            min_overlap: 0.5,
            workers: 1,
            ep_threshold: 1e-12,
        }
    }
}

impl SweepOptions {
    pub fn validate(&self) -> Result<(), SweepError> {
        for (name, v) in [
            ("gap_tol", self.gap_tol),
            ("ep_gap_tol", self.ep_gap_tol),
            ("bic_tol", self.bic_tol),
            ("min_overlap", self.min_overlap),
            ("ep_threshold", self.ep_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SweepError::InvalidSpec(format!("{name} must be positive")));
            }
        }
        if self.workers == 0 {
            return Err(SweepError::InvalidSpec("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Diagonalizes the model at the given parameter values, c-normalizing when possible.
pub(crate) fn evaluate<M: ParametricModel>(
    model: &M,
    at: &[(ParamPath, f64)],
    opts: &SweepOptions,
) -> Result<EigenSystem, SweepError> {
    let mut m = model.clone();
    for &(p, v) in at {
        m.set(p, v)?;
    }
    let h = m.matrix()?;
    let sys = eig_with(
        &h,
        &EigOptions {
            ep_threshold: opts.ep_threshold,
        },
    )?;
    match c_normalize(&sys, None) {
        Ok(s) => Ok(s),
        Err(LinalgError::NotComplexSymmetric) => Ok(sys),
        Err(e) => Err(e.into()),
    }
}

pub(crate) struct Matched {
    pub sys: EigenSystem,
    /// perm[k] = raw index of the new system now stored at label k.
    pub perm: Vec<usize>,
    pub min_overlap: f64,
}

fn spectral_scale(sys: &EigenSystem) -> f64 {
    sys.values().iter().map(|z| z.norm()).fold(1.0, f64::max)
}

/// Relabels `new` to continue the states of `prev`.
///
/// The score is the c-overlap |⟨left_prev_k|right_new_l⟩|, which is ≈1 for the continued
/// state and ≈0 otherwise. When either side carries an EP flag the c-overlap is undefined
/// and the normalized conjugated overlap is used instead. Ties break on eigenvalue distance.
pub(crate) fn match_systems(prev: &EigenSystem, new: &EigenSystem) -> Result<Matched, SweepError> {
    let n = prev.n();
    let use_c = !prev.any_ep() && !new.any_ep();
    let scale = spectral_scale(prev).max(spectral_scale(new));
    let mut ov = vec![vec![0.0; n]; n];
    let mut weight = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            ov[i][j] = if use_c {
                cdot(prev.left(i), new.right(j)).norm()
            } else {
                hdot(prev.right(i), new.right(j)).norm() / (norm2(prev.right(i)) * norm2(new.right(j)))
            };
            weight[i][j] = ov[i][j] - 1e-9 * (prev.value(i) - new.value(j)).norm() / scale;
        }
    }
    let perm = max_weight_assignment(&weight);
    let min_overlap = (0..n).map(|i| ov[i][perm[i]]).fold(f64::INFINITY, f64::min);
    let mut sys = new.permuted(&perm);
    if sys.is_c_normalized() {
        sys = c_normalize(&sys, Some(prev))?;
    } else {
        sys.align_phases(prev);
    }
    Ok(Matched { sys, perm, min_overlap })
}

/// True when the pair structure is degenerate enough that overlap matching is
/// intrinsically ambiguous (square-root branch point nearby).
pub(crate) fn near_ep(sys: &EigenSystem) -> bool {
    sys.any_ep() || sys.rigidities().iter().any(|&r| r < 0.5)
}

pub(crate) fn run_parallel<T: Send, F>(workers: usize, count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_paths_round_trip() {
        for (p, name) in PATHS {
            assert_eq!(p.to_string(), name);
            assert_eq!(name.parse::<ParamPath>().unwrap(), p);
        }
        assert!("omega".parse::<ParamPath>().is_err());
    }

    #[test]
    fn options_validation() {
        assert!(SweepOptions::default().validate().is_ok());
        let bad = SweepOptions {
            workers: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
