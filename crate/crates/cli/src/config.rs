use std::path::PathBuf;

use nhspec::open_system::ResonanceOptions;
use nhspec::scattering::BicOptions;
use nhspec::sweep::{LocateOptions, SweepOptions};

use crate::error::CliError;
use crate::model::ConfigBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Emit {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let mut e = Self {
            csv: false,
            json: false,
            svg: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "csv" => e.csv = true,
                "json" => e.json = true,
                "svg" => e.svg = true,
                other => return Err(CliError::input(format!("--emit: unknown format '{other}' (expected csv, json, svg)"))),
            }
        }
        Ok(e)
    }
}

/// Flag values that override the model file's [config] block.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub tol_ep: Option<f64>,
    pub pv_grid: Option<usize>,
    pub seed_p1: Option<f64>,
    pub seed_p2: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub out: PathBuf,
    pub emit: Emit,
    pub sweep: SweepOptions,
    pub locate: LocateOptions,
    pub resonance: ResonanceOptions,
    pub bic: BicOptions,
    pub seed_p1: Option<f64>,
    pub seed_p2: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::input(format!("{name} must be positive and finite")))
    }
}

impl RunConfig {
    pub fn new(out: PathBuf, emit: Emit, block: &ConfigBlock, o: &Overrides) -> Result<Self, CliError> {
        let mut sweep = SweepOptions::default();
        let mut locate = LocateOptions::default();
        let mut resonance = ResonanceOptions::default();
        let mut bic = BicOptions::default();
        if let Some(v) = block.gap_tol {
            sweep.gap_tol = positive("gap_tol", v)?;
        }
        if let Some(v) = o.tol_ep.or(block.ep_gap_tol) {
            sweep.ep_gap_tol = positive("ep_gap_tol", v)?;
            locate.gap_tol = sweep.ep_gap_tol;
        }
        if let Some(v) = block.bic_tol {
            sweep.bic_tol = positive("bic_tol", v)?;
            bic.bic_tol = sweep.bic_tol;
        }
        if let Some(v) = block.sc_tol {
            resonance.tol = positive("sc_tol", v)?;
        }
        if let Some(v) = block.sc_damping {
            if !(v > 0.0 && v <= 1.0) {
                return Err(CliError::input("sc_damping must lie in (0, 1]"));
            }
            resonance.damping = v;
        }
        if let Some(v) = block.sc_max_iter {
            if v == 0 {
                return Err(CliError::input("sc_max_iter must be >= 1"));
            }
            resonance.max_iter = v;
        }
        sweep.workers = o.workers.or(block.workers).unwrap_or(1);
        if sweep.workers == 0 {
            return Err(CliError::input("workers must be >= 1"));
        }
        if let Some(m) = o.pv_grid.or(block.pv_grid) {
            if m < 3 || m % 2 == 0 {
                return Err(CliError::input("pv grid size must be odd and >= 3"));
            }
        }
        for (name, v) in [("--seed-p1", o.seed_p1), ("--seed-p2", o.seed_p2)] {
            if let Some(x) = v {
                if !x.is_finite() {
                    return Err(CliError::input(format!("{name} must be finite")));
                }
            }
        }
        Ok(Self {
            out,
            emit,
            sweep,
            locate,
            resonance,
            bic,
            seed_p1: o.seed_p1,
            seed_p2: o.seed_p2,
        })
    }

    pub fn workers(&self) -> usize {
        self.sweep.workers
    }
}
