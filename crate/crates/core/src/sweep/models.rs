//! [`ParametricModel`] implementations for the built-in model types.

use serde::{Deserialize, Serialize};

use super::{ParamPath, ParametricModel, SweepError};
use crate::linalg::{ComplexMatrix, C64};
use crate::two_level::{ep_locations, AvoidedCrossingModel, PtTwoLevelModel, TwoLevelModel};

fn unknown(path: ParamPath, model: &'static str) -> SweepError {
    SweepError::UnknownParameter { path, model }
}

impl ParametricModel for TwoLevelModel {
    fn name(&self) -> &'static str {
        "two_level"
    }

    fn matrix(&self) -> Result<ComplexMatrix, SweepError> {
        Ok(TwoLevelModel::matrix(self))
    }

    fn get(&self, path: ParamPath) -> Result<f64, SweepError> {
        Ok(match path {
            ParamPath::OmegaRe => self.omega.re,
            ParamPath::OmegaIm => self.omega.im,
            ParamPath::Eps1Re => self.eps1.re,
            ParamPath::Eps1Im => self.eps1.im,
            ParamPath::Eps2Re => self.eps2.re,
            ParamPath::Eps2Im => self.eps2.im,
            ParamPath::Gamma1 => -2.0 * self.eps1.im,
            ParamPath::Gamma2 => -2.0 * self.eps2.im,
            p => return Err(unknown(p, "two_level")),
        })
    }

    fn set(&mut self, path: ParamPath, value: f64) -> Result<(), SweepError> {
        match path {
            ParamPath::OmegaRe => self.omega.re = value,
            ParamPath::OmegaIm => self.omega.im = value,
            ParamPath::Eps1Re => self.eps1.re = value,
            ParamPath::Eps1Im => self.eps1.im = value,
            ParamPath::Eps2Re => self.eps2.re = value,
            ParamPath::Eps2Im => self.eps2.im = value,
            ParamPath::Gamma1 => self.eps1.im = -0.5 * value,
            ParamPath::Gamma2 => self.eps2.im = -0.5 * value,
            p => return Err(unknown(p, "two_level")),
        }
        Ok(())
    }

    fn ep_candidates(&self, p1: ParamPath, p2: ParamPath) -> Option<Vec<(f64, f64)>> {
        let (wp, wm) = ep_locations(self.eps1, self.eps2).ok()?;
        match (p1, p2) {
            (ParamPath::OmegaRe, ParamPath::OmegaIm) => Some(vec![(wp.re, wp.im), (wm.re, wm.im)]),
            (ParamPath::OmegaIm, ParamPath::OmegaRe) => Some(vec![(wp.im, wp.re), (wm.im, wm.re)]),
            _ => None,
        }
    }
}

impl ParametricModel for PtTwoLevelModel {
    fn name(&self) -> &'static str {
        "pt_two_level"
    }

    fn matrix(&self) -> Result<ComplexMatrix, SweepError> {
        Ok(PtTwoLevelModel::matrix(self))
    }

    fn get(&self, path: ParamPath) -> Result<f64, SweepError> {
        Ok(match path {
            ParamPath::E => self.e(),
            ParamPath::Gamma => self.gamma(),
            ParamPath::OmegaRe => self.omega(),
            p => return Err(unknown(p, "pt_two_level")),
        })
    }

    fn set(&mut self, path: ParamPath, value: f64) -> Result<(), SweepError> {
        let (mut e, mut g, mut w) = (self.e(), self.gamma(), self.omega());
        match path {
            ParamPath::E => e = value,
            ParamPath::Gamma => g = value,
            ParamPath::OmegaRe => w = value,
            p => return Err(unknown(p, "pt_two_level")),
        }
        *self = PtTwoLevelModel::new(e, g, w).map_err(|err| SweepError::InvalidParameter(err.to_string()))?;
        Ok(())
    }
}

/// An [`AvoidedCrossingModel`] evaluated at a current value of `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidedCrossingSweep {
    pub model: AvoidedCrossingModel,
    pub a: f64,
}

impl AvoidedCrossingSweep {
    pub fn new(model: AvoidedCrossingModel, a: f64) -> Self {
        Self { model, a }
    }
}

impl ParametricModel for AvoidedCrossingSweep {
    fn name(&self) -> &'static str {
        "avoided_crossing"
    }

    fn matrix(&self) -> Result<ComplexMatrix, SweepError> {
        Ok(self.model.at(self.a).matrix())
    }

    fn get(&self, path: ParamPath) -> Result<f64, SweepError> {
        let (g1, g2) = self.model.gammas();
        Ok(match path {
            ParamPath::A => self.a,
            ParamPath::Gamma1 => g1,
            ParamPath::Gamma2 => g2,
            ParamPath::OmegaRe => self.model.omega().re,
            ParamPath::OmegaIm => self.model.omega().im,
            p => return Err(unknown(p, "avoided_crossing")),
        })
    }

    fn set(&mut self, path: ParamPath, value: f64) -> Result<(), SweepError> {
        let (g1, g2) = self.model.gammas();
        let w = self.model.omega();
        let invalid = |e: crate::two_level::TwoLevelError| SweepError::InvalidParameter(e.to_string());
        match path {
            ParamPath::A => self.a = value,
            ParamPath::Gamma1 => self.model = self.model.with_widths(value, g2).map_err(invalid)?,
            ParamPath::Gamma2 => self.model = self.model.with_widths(g1, value).map_err(invalid)?,
            ParamPath::OmegaRe => self.model = self.model.with_omega(C64::new(value, w.im)),
            ParamPath::OmegaIm => self.model = self.model.with_omega(C64::new(w.re, value)),
            p => return Err(unknown(p, "avoided_crossing")),
        }
        Ok(())
    }
}

/// H(p1, p2) = H0 + p1·H1 + p2·H2.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFamily {
    h0: ComplexMatrix,
    h1: ComplexMatrix,
    h2: ComplexMatrix,
    pub p1: f64,
    pub p2: f64,
}

impl AffineFamily {
    pub fn new(h0: ComplexMatrix, h1: ComplexMatrix, h2: ComplexMatrix) -> Result<Self, SweepError> {
        if h1.n() != h0.n() || h2.n() != h0.n() {
            return Err(SweepError::InvalidSpec("family matrices must share a dimension".into()));
        }
        Ok(Self {
            h0,
            h1,
            h2,
            p1: 0.0,
            p2: 0.0,
        })
    }
}

impl ParametricModel for AffineFamily {
    fn name(&self) -> &'static str {
        "affine_family"
    }

    fn matrix(&self) -> Result<ComplexMatrix, SweepError> {
        let data: Vec<C64> = self
            .h0
            .data()
            .iter()
            .zip(self.h1.data())
            .zip(self.h2.data())
            .map(|((a, b), c)| a + b * self.p1 + c * self.p2)
            .collect();
        let n = self.h0.n();
        let m = ComplexMatrix::general(n, data)?;
        let sym = m.detect_symmetry();
        Ok(m.with_symmetry(sym)?)
    }

    fn get(&self, path: ParamPath) -> Result<f64, SweepError> {
        match path {
            ParamPath::P1 => Ok(self.p1),
            ParamPath::P2 => Ok(self.p2),
            p => Err(unknown(p, "affine_family")),
        }
    }

    fn set(&mut self, path: ParamPath, value: f64) -> Result<(), SweepError> {
        match path {
            ParamPath::P1 => self.p1 = value,
            ParamPath::P2 => self.p2 = value,
            p => return Err(unknown(p, "affine_family")),
        }
        Ok(())
    }
}
