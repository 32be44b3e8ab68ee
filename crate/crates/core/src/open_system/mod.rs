//! Effective Hamiltonian of a bound subspace coupled to a continuum of decay channels.

mod pv;
mod resonances;
mod trapping;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ComplexMatrix, LinalgError, Symmetry, C64};

pub use pv::{pv_integral, window_integral};
pub use resonances::{
    assemble_heff, basis_vectors, interior_rigidity, mixing_coefficients, solve_resonances, EffectiveHamiltonian,
    InteriorExpansion, MixingBasis, MixingReport, ResonanceOptions, ResonanceState,
};
pub use trapping::{toy_trapping, LinearFit, ToyTrappingModel, TrappingOptions, TrappingReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpenSystemError {
    #[error("energy {energy} lies outside the window ({low}, {high})")]
    OutsideWindow { energy: f64, low: f64, high: f64 },
    #[error("energy {energy} is within half a grid cell of a threshold")]
    TooCloseToThreshold { energy: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("state {state} failed to reach self-consistency (residual {residual:e})")]
    SelfConsistencyFailure { state: usize, residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Energy dependence of the real coupling amplitudes γ̂_k^c(E).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingProfile {
    /// amplitudes[k][c], independent of energy.
    Constant { amplitudes: Vec<Vec<f64>> },
    /// Piecewise-linear table, values[point][k][c]; clamped outside its range.
    Table { energies: Vec<f64>, values: Vec<Vec<Vec<f64>>> },
    /// amplitudes[k][c]·(1 − x²)^¼ with x the window mapped onto [−1, 1], zero outside.
    Semicircle { amplitudes: Vec<Vec<f64>> },
}

impl CouplingProfile {
    fn shape(&self) -> Result<(usize, usize), OpenSystemError> {
        let dims = |a: &Vec<Vec<f64>>| -> Result<(usize, usize), OpenSystemError> {
            let n = a.len();
            let c = a.first().map_or(0, |r| r.len());
            if a.iter().any(|r| r.len() != c) {
                return Err(OpenSystemError::InvalidModel("ragged coupling matrix".into()));
            }
            Ok((n, c))
        };
        match self {
            Self::Constant { amplitudes } | Self::Semicircle { amplitudes } => dims(amplitudes),
            Self::Table { energies, values } => {
                if energies.len() < 2 || energies.len() != values.len() {
                    return Err(OpenSystemError::InvalidModel(
                        "coupling table needs >= 2 energies with one value block each".into(),
                    ));
                }
                if energies.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(OpenSystemError::InvalidModel("coupling table energies must increase".into()));
                }
                let shape = dims(&values[0])?;
                for v in values {
                    if dims(v)? != shape {
                        return Err(OpenSystemError::InvalidModel("coupling table blocks differ in shape".into()));
                    }
                }
                Ok(shape)
            }
        }
    }

    /// γ̂[k][c] at energy `e`.
    pub fn eval(&self, e: f64, window: (f64, f64)) -> Vec<Vec<f64>> {
        match self {
            Self::Constant { amplitudes } => amplitudes.clone(),
            Self::Semicircle { amplitudes } => {
                let x = (2.0 * e - window.0 - window.1) / (window.1 - window.0);
                let f = if x.abs() < 1.0 { (1.0 - x * x).sqrt().sqrt() } else { 0.0 };
                amplitudes.iter().map(|r| r.iter().map(|a| a * f).collect()).collect()
            }
            Self::Table { energies, values } => {
                let last = energies.len() - 1;
                if e <= energies[0] {
                    return values[0].clone();
                }
                if e >= energies[last] {
                    return values[last].clone();
                }
                let hi = energies.partition_point(|&x| x <= e).min(last);
                let lo = hi - 1;
                let t = (e - energies[lo]) / (energies[hi] - energies[lo]);
                values[lo]
                    .iter()
                    .zip(&values[hi])
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect())
                    .collect()
            }
        }
    }
}

/// Bound states E_k^B with direct interaction, coupled to C channels open inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSystemModel {
    e_b: Vec<f64>,
    v_direct: Vec<Vec<f64>>,
    coupling: CouplingProfile,
    window: (f64, f64),
    grid_size: usize,
    n_channels: usize,
    /// γ̂ on the continuum grid, [node][k][c].
    grid_values: Vec<Vec<Vec<f64>>>,
}

impl OpenSystemModel {
    pub fn new(
        e_b: Vec<f64>,
        v_direct: Option<Vec<Vec<f64>>>,
        coupling: CouplingProfile,
        window: (f64, f64),
        grid_size: usize,
    ) -> Result<Self, OpenSystemError> {
        let n = e_b.len();
        if n == 0 {
            return Err(OpenSystemError::InvalidModel("at least one bound state is required".into()));
        }
        if e_b.iter().any(|e| !e.is_finite()) {
            return Err(OpenSystemError::InvalidModel("bound energies must be finite".into()));
        }
        if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(OpenSystemError::InvalidModel("window must satisfy low < high".into()));
        }
        if grid_size < 3 || grid_size % 2 == 0 {
            return Err(OpenSystemError::InvalidModel("grid size must be odd and >= 3".into()));
        }
        let v_direct = v_direct.unwrap_or_else(|| vec![vec![0.0; n]; n]);
        if v_direct.len() != n || v_direct.iter().any(|r| r.len() != n) {
            return Err(OpenSystemError::InvalidModel("direct interaction must be N×N".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if !v_direct[i][j].is_finite() || v_direct[i][j] != v_direct[j][i] {
                    return Err(OpenSystemError::InvalidModel("direct interaction must be finite and symmetric".into()));
                }
            }
        }
        let (rows, n_channels) = coupling.shape()?;
        if rows != n {
            return Err(OpenSystemError::InvalidModel(format!("coupling has {rows} rows for {n} states")));
        }
        if n_channels == 0 {
            return Err(OpenSystemError::InvalidModel("at least one channel is required".into()));
        }
        let mut m = Self {
            e_b,
            v_direct,
            coupling,
            window,
            grid_size,
            n_channels,
            grid_values: Vec::new(),
        };
        m.grid_values = m.grid().iter().map(|&e| m.coupling.eval(e, window)).collect();
        if m.grid_values.iter().flatten().flatten().any(|g| !g.is_finite()) {
            return Err(OpenSystemError::InvalidModel("coupling must be finite on the window".into()));
        }
        Ok(m)
    }

    pub fn n_states(&self) -> usize {
        self.e_b.len()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn e_b(&self) -> &[f64] {
        &self.e_b
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn coupling(&self) -> &CouplingProfile {
        &self.coupling
    }

    pub fn with_grid_size(&self, grid_size: usize) -> Result<Self, OpenSystemError> {
        Self::new(
            self.e_b.clone(),
            Some(self.v_direct.clone()),
            self.coupling.clone(),
            self.window,
            grid_size,
        )
    }

    /// Uniform continuum grid spanning the window exactly.
    pub fn grid(&self) -> Vec<f64> {
        grid(self.window, self.grid_size)
    }

    pub fn gamma_hat(&self, e: f64) -> Vec<Vec<f64>> {
        self.coupling.eval(e, self.window)
    }

    pub fn in_window(&self, e: f64) -> bool {
        e > self.window.0 && e < self.window.1
    }

    /// H_B = diag(E^B) + V_direct.
    pub fn h_b(&self) -> ComplexMatrix {
        let n = self.n_states();
        let mut d = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = C64::new(self.v_direct[i][j] + if i == j { self.e_b[i] } else { 0.0 }, 0.0);
            }
        }
        ComplexMatrix::new(n, d, Symmetry::Hermitian).expect("validated symmetric")
    }

    pub fn scale(&self) -> f64 {
        self.e_b
            .iter()
            .map(|e| e.abs())
            .chain([self.window.0.abs(), self.window.1.abs()])
            .fold(1.0, f64::max)
    }
}

pub(crate) fn grid(window: (f64, f64), m: usize) -> Vec<f64> {
    let (l, h) = window;
    (0..m)
        .map(|k| if k + 1 == m { h } else { l + (h - l) * k as f64 / (m - 1) as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_and_clamps() {
        let p = CouplingProfile::Table {
            energies: vec![0.0, 1.0],
            values: vec![vec![vec![1.0]], vec![vec![3.0]]],
        };
        assert_eq!(p.eval(0.25, (0.0, 1.0)), vec![vec![1.5]]);
        assert_eq!(p.eval(-1.0, (0.0, 1.0)), vec![vec![1.0]]);
        assert_eq!(p.eval(2.0, (0.0, 1.0)), vec![vec![3.0]]);
    }

    #[test]
    fn model_validation() {
        let k = CouplingProfile::Constant {
            amplitudes: vec![vec![0.1]],
        };
        assert!(OpenSystemModel::new(vec![0.0], None, k.clone(), (-1.0, 1.0), 101).is_ok());
        assert!(OpenSystemModel::new(vec![0.0], None, k.clone(), (-1.0, 1.0), 100).is_err());
        assert!(OpenSystemModel::new(vec![0.0], None, k.clone(), (1.0, -1.0), 101).is_err());
        assert!(OpenSystemModel::new(vec![0.0, 1.0], None, k, (-1.0, 1.0), 101).is_err());
    }

    #[test]
    fn grid_hits_both_thresholds() {
        let g = grid((-1.0, 2.0), 7);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[6], 2.0);
        assert_eq!(g.len(), 7);
    }
}
