//! TOML model files.

use std::path::Path;

use nhspec::open_system::{CouplingProfile, OpenSystemModel, ToyTrappingModel};
use nhspec::scattering::{feature_grid, Background, Pole, SMatrixModel};
use nhspec::sweep::{AvoidedCrossingSweep, EncircleSpec, ParamPath, SweepSpec};
use nhspec::two_level::{Affine, AvoidedCrossingModel, PtTwoLevelModel, TwoLevelModel};
use nhspec::{ComplexMatrix, Symmetry, C64};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

pub const VERSION: &str = "1";

/// Complex number written as [re, im].
type Cx = [f64; 2];

fn cx(v: Cx) -> C64 {
    C64::new(v[0], v[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    TwoLevel,
    PtTwoLevel,
    AvoidedCrossing,
    OpenSystem,
    ToyTrapping,
    Smatrix,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Self::TwoLevel => "two_level",
            Self::PtTwoLevel => "pt_two_level",
            Self::AvoidedCrossing => "avoided_crossing",
            Self::OpenSystem => "open_system",
            Self::ToyTrapping => "toy_trapping",
            Self::Smatrix => "smatrix",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: String,
    pub kind: Kind,
    pub parameters: toml::Table,
    pub sweep: Option<SweepSpec>,
    pub locate: Option<LocateBlock>,
    pub encircle: Option<EncircleSpec>,
    pub trap: Option<TrapBlock>,
    pub scatter: Option<ScatterBlock>,
    #[serde(default)]
    pub config: ConfigBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocateBlock {
    #[serde(default = "omega_re")]
    pub p1: ParamPath,
    #[serde(default = "omega_im")]
    pub p2: ParamPath,
    pub seed: Option<[f64; 2]>,
}

fn omega_re() -> ParamPath {
    ParamPath::OmegaRe
}

fn omega_im() -> ParamPath {
    ParamPath::OmegaIm
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapBlock {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub trapped_fraction: Option<f64>,
}

impl TrapBlock {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        uniform(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Uniform { start: f64, stop: f64, points: usize },
    /// Fine core around `center`, geometric spacing out to ±half_span.
    Feature {
        center: f64,
        width: f64,
        half_span: f64,
        per_width: usize,
    },
}

impl GridSpec {
    pub fn build(&self) -> Result<Vec<f64>, CliError> {
        match *self {
            Self::Uniform { start, stop, points } => uniform(start, stop, points),
            Self::Feature {
                center,
                width,
                half_span,
                per_width,
            } => {
                if !(width > 0.0 && half_span > width && per_width >= 1) {
                    return Err(CliError::input("scatter.grid: need width > 0, half_span > width, per_width >= 1"));
                }
                Ok(feature_grid(center, width, half_span, per_width))
            }
        }
    }
}

fn uniform(start: f64, stop: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 || !(stop > start) {
        return Err(CliError::input("grid needs stop > start and at least 2 points"));
    }
    Ok((0..points)
        .map(|t| {
            if t + 1 == points {
                stop
            } else {
                start + (stop - start) * t as f64 / (points - 1) as f64
            }
        })
        .collect())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterBlock {
    pub grid: GridSpec,
    /// Window searched for bound states in the continuum; defaults to the grid range.
    pub bic_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigBlock {
    pub gap_tol: Option<f64>,
    pub ep_gap_tol: Option<f64>,
    pub bic_tol: Option<f64>,
    pub pv_grid: Option<usize>,
    pub sc_tol: Option<f64>,
    pub sc_max_iter: Option<usize>,
    pub sc_damping: Option<f64>,
    pub workers: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoLevelParams {
    eps1: Cx,
    eps2: Cx,
    omega: Cx,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PtParams {
    e: f64,
    gamma: f64,
    omega: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AvoidedParams {
    e1: Affine,
    e2: Affine,
    gamma1: f64,
    gamma2: f64,
    omega: Cx,
    #[serde(default)]
    a: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenParams {
    e_b: Vec<f64>,
    v_direct: Option<Vec<Vec<f64>>>,
    coupling: CouplingProfile,
    window: [f64; 2],
    #[serde(default = "default_grid")]
    grid_size: usize,
}

fn default_grid() -> usize {
    401
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToyParams {
    chain: Option<usize>,
    h0: Option<Vec<f64>>,
    v: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoleSpec {
    z: Cx,
    gamma: Vec<Cx>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DoublePoleSpec {
    e_d: f64,
    gamma_d: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BackgroundSpec {
    constant: Vec<Vec<Cx>>,
    slope: Vec<Vec<Cx>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SmatrixParams {
    n_channels: Option<usize>,
    poles: Option<Vec<PoleSpec>>,
    double_pole: Option<DoublePoleSpec>,
    h_b: Option<Vec<Vec<f64>>>,
    gamma_hat: Option<Vec<Vec<f64>>>,
    background: Option<BackgroundSpec>,
}

#[derive(Debug, Clone)]
pub enum SMatrixSource {
    Poles(SMatrixModel),
    DoublePole { e_d: f64, gamma_d: f64 },
    /// Energy-independent (H_B, γ̂) with its pole expansion.
    Resolvent {
        h_b: ComplexMatrix,
        gamma_hat: Vec<Vec<f64>>,
        poles: SMatrixModel,
    },
}

#[derive(Debug, Clone)]
pub enum Model {
    TwoLevel(TwoLevelModel),
    PtTwoLevel(PtTwoLevelModel),
    AvoidedCrossing(AvoidedCrossingSweep),
    OpenSystem(OpenSystemModel),
    ToyTrapping(ToyTrappingModel),
    SMatrix(SMatrixSource),
}

fn check_finite(v: &toml::Value, path: &str) -> Result<(), CliError> {
    match v {
        toml::Value::Float(x) if !x.is_finite() => Err(CliError::input(format!("{path}: value must be finite"))),
        toml::Value::Array(a) => a
            .iter()
            .enumerate()
            .try_for_each(|(i, x)| check_finite(x, &format!("{path}[{i}]"))),
        toml::Value::Table(t) => t.iter().try_for_each(|(k, x)| {
            let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            check_finite(x, &p)
        }),
        _ => Ok(()),
    }
}

fn params<T: DeserializeOwned>(t: &toml::Table, kind: Kind) -> Result<T, CliError> {
    toml::Value::Table(t.clone())
        .try_into()
        .map_err(|e: toml::de::Error| CliError::input(format!("parameters ({}): {}", kind.name(), e.message())))
}

fn real_symmetric(rows: &[Vec<f64>], what: &str) -> Result<ComplexMatrix, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::input(format!("{what} must be a non-empty square matrix")));
    }
    let data = rows.iter().flatten().map(|&x| C64::new(x, 0.0)).collect();
    ComplexMatrix::new(n, data, Symmetry::Hermitian).map_err(|e| CliError::input(format!("{what}: {e}")))
}

fn complex_matrix(rows: &[Vec<Cx>]) -> Vec<Vec<C64>> {
    rows.iter().map(|r| r.iter().map(|&v| cx(v)).collect()).collect()
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::input(format!("model file: {}", e.message())))?;
        check_finite(&toml::Value::Table(raw.clone()), "")?;
        let file: ModelFile = toml::Value::Table(raw)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::input(format!("model file: {}", e.message())))?;
        if file.version != VERSION {
            return Err(CliError::input(format!("unsupported model file version '{}' (expected '{VERSION}')", file.version)));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let k = self.kind;
        let p = &self.parameters;
        Ok(match k {
            Kind::TwoLevel => {
                let q: TwoLevelParams = params(p, k)?;
                Model::TwoLevel(TwoLevelModel::new(cx(q.eps1), cx(q.eps2), cx(q.omega)))
            }
            Kind::PtTwoLevel => {
                let q: PtParams = params(p, k)?;
                Model::PtTwoLevel(PtTwoLevelModel::new(q.e, q.gamma, q.omega)?)
            }
            Kind::AvoidedCrossing => {
                let q: AvoidedParams = params(p, k)?;
                let m = AvoidedCrossingModel::new(q.e1, q.e2, q.gamma1, q.gamma2, cx(q.omega))?;
                Model::AvoidedCrossing(AvoidedCrossingSweep::new(m, q.a))
            }
            Kind::OpenSystem => {
                let q: OpenParams = params(p, k)?;
                let grid = self.config.pv_grid.unwrap_or(q.grid_size);
                Model::OpenSystem(OpenSystemModel::new(q.e_b, q.v_direct, q.coupling, (q.window[0], q.window[1]), grid)?)
            }
            Kind::ToyTrapping => {
                let q: ToyParams = params(p, k)?;
                let mut m = match (q.chain, q.h0, q.v) {
                    (Some(n), None, None) => ToyTrappingModel::linear_chain(n),
                    (None, Some(h0), Some(v)) => ToyTrappingModel::new(h0, v)?,
                    _ => return Err(CliError::input("parameters (toy_trapping): give either `chain` or both `h0` and `v`")),
                };
                m.alpha = q.alpha;
                Model::ToyTrapping(m)
            }
            Kind::Smatrix => Model::SMatrix(smatrix(params(p, k)?)?),
        })
    }
}

fn smatrix(q: SmatrixParams) -> Result<SMatrixSource, CliError> {
    let given = [q.poles.is_some(), q.double_pole.is_some(), q.h_b.is_some() || q.gamma_hat.is_some()];
    if given.iter().filter(|&&b| b).count() != 1 {
        return Err(CliError::input(
            "parameters (smatrix): give exactly one of `poles`, `double_pole`, or `h_b` with `gamma_hat`",
        ));
    }
    if let Some(d) = q.double_pole {
        if q.background.is_some() {
            return Err(CliError::input("parameters (smatrix): `background` is not supported with `double_pole`"));
        }
        return Ok(SMatrixSource::DoublePole {
            e_d: d.e_d,
            gamma_d: d.gamma_d,
        });
    }
    let (source, poles) = if let Some(poles) = q.poles {
        let c = q
            .n_channels
            .or_else(|| poles.first().map(|p| p.gamma.len()))
            .ok_or_else(|| CliError::input("parameters (smatrix): missing field `n_channels`"))?;
        let poles = poles
            .into_iter()
            .map(|p| Pole {
                z: cx(p.z),
                gamma: p.gamma.into_iter().map(cx).collect(),
            })
            .collect();
        (None, SMatrixModel::new(poles, c)?)
    } else {
        let h_b = q.h_b.ok_or_else(|| CliError::input("parameters (smatrix): missing field `h_b`"))?;
        let gamma_hat = q
            .gamma_hat
            .ok_or_else(|| CliError::input("parameters (smatrix): missing field `gamma_hat`"))?;
        let h = real_symmetric(&h_b, "h_b")?;
        let m = SMatrixModel::from_heff(&h, &gamma_hat)?;
        (Some((h, gamma_hat)), m)
    };
    if let Some(n) = q.n_channels {
        if n != poles.n_channels() {
            return Err(CliError::input(format!(
                "parameters (smatrix): n_channels = {n} but the couplings have {} channels",
                poles.n_channels()
            )));
        }
    }
    let poles = match q.background {
        Some(b) => {
            if source.is_some() {
                return Err(CliError::input("parameters (smatrix): `background` is not supported with `h_b`"));
            }
            poles.with_background(Background {
                constant: complex_matrix(&b.constant),
                slope: complex_matrix(&b.slope),
            })?
        }
        None => poles,
    };
    Ok(match source {
        None => SMatrixSource::Poles(poles),
        Some((h_b, gamma_hat)) => SMatrixSource::Resolvent { h_b, gamma_hat, poles },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_field_is_named() {
        let f = ModelFile::parse(
            "version = \"1\"\nkind = \"two_level\"\n[parameters]\neps1 = [1.0, 0.0]\neps2 = [-1.0, 0.0]\n",
        )
        .unwrap();
        let err = f.model().unwrap_err().to_string();
        assert!(err.contains("omega"), "{err}");
    }

    #[test]
    fn non_finite_is_rejected() {
        let err = ModelFile::parse("version = \"1\"\nkind = \"pt_two_level\"\n[parameters]\ne = 0.0\ngamma = nan\nomega = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("parameters.gamma"), "{err}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        assert!(ModelFile::parse("version = \"2\"\nkind = \"two_level\"\n[parameters]\n").is_err());
    }

    #[test]
    fn uniform_grid_hits_endpoints() {
        let g = uniform(-1.0, 0.7, 7).unwrap();
        assert_eq!((g[0], g[6]), (-1.0, 0.7));
    }
}
