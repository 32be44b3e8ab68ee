use serde::{Deserialize, Serialize};

use super::OpenSystemError;
use crate::linalg::{ComplexMatrix, Symmetry, C64};
use crate::sweep::{evaluate, match_systems, run_parallel, ParamPath, ParametricModel, SweepError, SweepOptions};

/// H(α) = H₀ − iα V Vᵀ with H₀ real diagonal and V real N×C.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrappingModel {
    h0: Vec<f64>,
    v: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl ToyTrappingModel {
    pub fn new(h0: Vec<f64>, v: Vec<Vec<f64>>) -> Result<Self, OpenSystemError> {
        let n = h0.len();
        let c = v.first().map_or(0, |r| r.len());
        if n == 0 || v.len() != n || v.iter().any(|r| r.len() != c) {
            return Err(OpenSystemError::InvalidModel("V must be N×C with N = len(H0)".into()));
        }
        if c == 0 || c >= n {
            return Err(OpenSystemError::InvalidModel("need 1 <= C < N channels".into()));
        }
        if h0.iter().chain(v.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(OpenSystemError::InvalidModel("H0 and V must be finite".into()));
        }
        Ok(Self { h0, v, alpha: 0.0 })
    }

    /// Linear chain of m = 2n+1 equidistant levels, one channel coupling uniformly.
    pub fn linear_chain(n: usize) -> Self {
        let m = 2 * n + 1;
        let h0 = (0..m).map(|k| k as f64 - n as f64).collect();
        let v = vec![vec![1.0 / (m as f64).sqrt()]; m];
        Self::new(h0, v).expect("valid chain")
    }

    pub fn h0(&self) -> &[f64] {
        &self.h0
    }

    pub fn v(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn n_channels(&self) -> usize {
        self.v[0].len()
    }

    /// Σ_jc V_jc².
    pub fn coupling_norm_sq(&self) -> f64 {
        self.v.iter().flatten().map(|x| x * x).sum()
    }
}

impl ParametricModel for ToyTrappingModel {
    fn name(&self) -> &'static str {
        "toy_trapping"
    }

    fn matrix(&self) -> Result<ComplexMatrix, SweepError> {
        let n = self.h0.len();
        let mut d = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let w: f64 = self.v[i].iter().zip(&self.v[j]).map(|(a, b)| a * b).sum();
                d[i * n + j] = C64::new(if i == j { self.h0[i] } else { 0.0 }, -self.alpha * w);
            }
        }
        Ok(ComplexMatrix::new(n, d, Symmetry::ComplexSymmetric)?)
    }

    fn get(&self, path: ParamPath) -> Result<f64, SweepError> {
        match path {
            ParamPath::Alpha => Ok(self.alpha),
            p => Err(SweepError::UnknownParameter {
                path: p,
                model: "toy_trapping",
            }),
        }
    }

    fn set(&mut self, path: ParamPath, value: f64) -> Result<(), SweepError> {
        match path {
            ParamPath::Alpha if value.is_finite() => {
                self.alpha = value;
                Ok(())
            }
            ParamPath::Alpha => Err(SweepError::InvalidParameter("alpha must be finite".into())),
            p => Err(SweepError::UnknownParameter {
                path: p,
                model: "toy_trapping",
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrappingOptions {
    /// A state is trapped when its final width is below this fraction of its own maximum.
    pub trapped_fraction: f64,
    pub workers: usize,
}

impl Default for TrappingOptions {
    fn default() -> Self {
        Self {
            trapped_fraction: 0.1,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// max |residual| / max |y| over the fitted points.
    pub relative_residual: f64,
}

fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ymax = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rmax = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    LinearFit {
        slope,
        intercept,
        relative_residual: if ymax > 0.0 { rmax / ymax } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrappingReport {
    pub alphas: Vec<f64>,
    /// values[t][k]: trajectory k at alphas[t].
    pub values: Vec<Vec<C64>>,
    /// Γ_k = −2 Im z_k.
    pub widths: Vec<Vec<f64>>,
    /// Trajectory with the largest width at the last α.
    pub broadest: usize,
    /// Γ₀/m along the grid.
    pub order_parameter: Vec<f64>,
    /// α at the largest increase of dΓ₀/dα between adjacent grid intervals.
    pub alpha_cr: Option<f64>,
    /// Linear fit of Γ₀/m over the top half of the grid.
    pub fit: Option<LinearFit>,
    pub trapped: Vec<bool>,
    /// Every width except the broadest is non-increasing over the top half of the grid.
    pub others_non_increasing: bool,
    /// max_α |Σ z_k − (tr H₀ − iα tr VVᵀ)|.
    pub max_trace_residual: f64,
    /// max_α |Σ Γ_k − 2α Σ V²|.
    pub max_width_sum_residual: f64,
    /// Largest Im z_k seen anywhere (≤ 0 for a dissipative coupling).
    pub max_imag: f64,
}

/// Diagonalizes H₀ − iαVVᵀ along `alpha_grid` with overlap-matched trajectories.
pub fn toy_trapping(
    model: &ToyTrappingModel,
    alpha_grid: &[f64],
    opts: &TrappingOptions,
) -> Result<TrappingReport, OpenSystemError> {
    if alpha_grid.len() < 2 {
        return Err(OpenSystemError::InvalidModel("alpha grid needs at least two points".into()));
    }
    if alpha_grid.iter().any(|a| !(a.is_finite() && *a >= 0.0)) || alpha_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(OpenSystemError::InvalidModel("alpha grid must be increasing and >= 0".into()));
    }
    if !(opts.trapped_fraction > 0.0 && opts.trapped_fraction < 1.0) || opts.workers == 0 {
        return Err(OpenSystemError::InvalidModel("invalid trapping options".into()));
    }
    let sweep_opts = SweepOptions {
        workers: opts.workers,
        ..Default::default()
    };
    let sweep_err = |e: SweepError| match e {
        SweepError::Linalg(l) => OpenSystemError::Linalg(l),
        other => OpenSystemError::InvalidModel(other.to_string()),
    };
    let raw = run_parallel(opts.workers, alpha_grid.len(), |t| {
        evaluate(model, &[(ParamPath::Alpha, alpha_grid[t])], &sweep_opts)
    });
    let mut systems = Vec::with_capacity(raw.len());
    for r in raw {
        let sys = r.map_err(sweep_err)?;
        let next = match systems.last() {
            None => sys,
            Some(prev) => match_systems(prev, &sys).map_err(sweep_err)?.sys,
        };
        systems.push(next);
    }
    let n = model.h0.len();
    let values: Vec<Vec<C64>> = systems.iter().map(|s| s.values().to_vec()).collect();
    let widths: Vec<Vec<f64>> = values.iter().map(|v| v.iter().map(|z| -2.0 * z.im).collect()).collect();
    let last = widths.len() - 1;
    let broadest = (0..n).max_by(|&a, &b| widths[last][a].total_cmp(&widths[last][b])).unwrap_or(0);
    let order_parameter: Vec<f64> = widths.iter().map(|w| w[broadest] / n as f64).collect();

    let slopes: Vec<f64> = (0..last)
        .map(|t| (order_parameter[t + 1] - order_parameter[t]) / (alpha_grid[t + 1] - alpha_grid[t]))
        .collect();
    let alpha_cr = (1..slopes.len())
        .max_by(|&a, &b| (slopes[a] - slopes[a - 1]).total_cmp(&(slopes[b] - slopes[b - 1])))
        .map(|t| alpha_grid[t]);

    let top = alpha_grid.len() / 2;
    let fit = (alpha_grid.len() - top >= 2).then(|| linear_fit(&alpha_grid[top..], &order_parameter[top..]));
    let others_non_increasing = (0..n).filter(|&k| k != broadest).all(|k| {
        (top..last).all(|t| widths[t + 1][k] <= widths[t][k] + 1e-12 * (1.0 + widths[t][k].abs()))
    });
    let trapped = (0..n)
        .map(|k| {
            let max = widths.iter().map(|w| w[k]).fold(0.0, f64::max);
            max > 0.0 && widths[last][k] < opts.trapped_fraction * max
        })
        .collect();
    let tr_h0: f64 = model.h0.iter().sum();
    let vv = model.coupling_norm_sq();
    let mut max_trace_residual: f64 = 0.0;
    let mut max_width_sum_residual: f64 = 0.0;
    for (t, &a) in alpha_grid.iter().enumerate() {
        let sum: C64 = values[t].iter().sum();
        max_trace_residual = max_trace_residual.max((sum - C64::new(tr_h0, -a * vv)).norm());
        let gsum: f64 = widths[t].iter().sum();
        max_width_sum_residual = max_width_sum_residual.max((gsum - 2.0 * a * vv).abs());
    }
    let max_imag = values.iter().flatten().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
    Ok(TrappingReport {
        alphas: alpha_grid.to_vec(),
        values,
        widths,
        broadest,
        order_parameter,
        alpha_cr,
        fit,
        trapped,
        others_non_increasing,
        max_trace_residual,
        max_width_sum_residual,
        max_imag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_at_zero_coupling() {
        let m = ToyTrappingModel::linear_chain(2);
        let r = toy_trapping(&m, &[0.0, 0.5, 1.0], &TrappingOptions::default()).unwrap();
        assert!(r.widths[0].iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn fit_of_a_line_is_exact() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.relative_residual < 1e-14);
    }

    #[test]
    fn rejects_too_many_channels() {
        assert!(ToyTrappingModel::new(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
    }
}
