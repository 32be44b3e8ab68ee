use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{evaluate, match_systems, ParamPath, ParametricModel, SweepError, SweepOptions};
use crate::linalg::{cdot, hdot, max_weight_assignment, norm2, EigenSystem, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Counterclockwise,
    Clockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncircleSpec {
    pub p1: ParamPath,
    pub p2: ParamPath,
    pub center: (f64, f64),
    pub radius: f64,
    pub steps_per_cycle: usize,
    pub cycles: usize,
    #[serde(default)]
    pub orientation: Orientation,
}

impl EncircleSpec {
    /// Contour in the complex ω plane with the default 256 steps and 4 cycles.
    pub fn omega_circle(center: C64, radius: f64) -> Self {
        Self {
            p1: ParamPath::OmegaRe,
            p2: ParamPath::OmegaIm,
            center: (center.re, center.im),
            radius,
            steps_per_cycle: 256,
            cycles: 4,
            orientation: Orientation::Counterclockwise,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(SweepError::InvalidSpec("radius must be positive".into()));
        }
        if self.steps_per_cycle < 64 {
            return Err(SweepError::InvalidSpec("steps_per_cycle must be >= 64".into()));
        }
        if self.cycles < 1 {
            return Err(SweepError::InvalidSpec("cycles must be >= 1".into()));
        }
        if self.p1 == self.p2 {
            return Err(SweepError::InvalidSpec("p1 and p2 must differ".into()));
        }
        Ok(())
    }

    /// Angle of (possibly fractional) step s; whole cycles land exactly on θ = 0.
    fn theta(&self, s: f64) -> f64 {
        let n = self.steps_per_cycle as f64;
        let r = s % n;
        let dir = match self.orientation {
            Orientation::Counterclockwise => 1.0,
            Orientation::Clockwise => -1.0,
        };
        dir * 2.0 * PI * r / n
    }

    fn point(&self, s: f64) -> (f64, f64) {
        let th = self.theta(s);
        if th == 0.0 {
            return (self.center.0 + self.radius, self.center.1);
        }
        (self.center.0 + self.radius * th.cos(), self.center.1 + self.radius * th.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Transported state k sits on start state permutation[k] (cumulative).
    pub permutation: Vec<usize>,
    /// Start state j is carried onto start state per_cycle_permutation[j] by this cycle.
    pub per_cycle_permutation: Vec<usize>,
    /// Cumulative factor f_k with φ_k(transported) = f_k·φ_{permutation[k]}(start), c-gauge.
    pub factors: Vec<C64>,
    /// Cumulative factors after rescaling the swapping partner by λ = √(a/b), which
    /// makes the per-cycle factor identical for both states.
    pub symmetric_factors: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourPoint {
    pub step: usize,
    pub theta: f64,
    pub p1: f64,
    pub p2: f64,
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    pub cycles: Vec<CycleRecord>,
    /// Smallest number of cycles restoring every eigenvalue.
    pub eigenvalue_period: Option<usize>,
    /// Smallest number of cycles restoring every eigenvector including its phase (1e-3).
    pub eigenvector_period: Option<usize>,
    pub gauge_lambda: Option<C64>,
    /// Heuristic: the gap at the centre is below a tenth of the smallest gap on the contour.
    pub encloses_candidate: bool,
    pub candidates_inside: Option<usize>,
    pub contour: Vec<ContourPoint>,
}

const PHASE_TOL: f64 = 1e-3;

fn min_gap(v: &[C64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            g = g.min((v[i] - v[j]).norm());
        }
    }
    g
}

struct Ctx<'a, M> {
    model: &'a M,
    spec: &'a EncircleSpec,
    opts: &'a SweepOptions,
}

impl<M: ParametricModel> Ctx<'_, M> {
    fn eval(&self, s: f64) -> Result<EigenSystem, SweepError> {
        let (x, y) = self.spec.point(s);
        evaluate(self.model, &[(self.spec.p1, x), (self.spec.p2, y)], self.opts)
    }

    fn transport(&self, prev: &EigenSystem, s0: f64, s1: f64, new: &EigenSystem, depth: u32) -> Result<EigenSystem, SweepError> {
        let m = match_systems(prev, new)?;
        if m.min_overlap >= self.opts.min_overlap {
            return Ok(m.sys);
        }
        if depth >= self.opts.max_refine_depth {
            return Err(SweepError::TransportAmbiguous {
                theta: self.spec.theta(s1),
                overlap: m.min_overlap,
            });
        }
        let mid = 0.5 * (s0 + s1);
        let mid_sys = self.eval(mid)?;
        let a = self.transport(prev, s0, mid, &mid_sys, depth + 1)?;
        self.transport(&a, mid, s1, new, depth + 1)
    }
}

/// Map of the transported states onto the start states: (permutation, factors).
fn monodromy(start: &EigenSystem, cur: &EigenSystem) -> (Vec<usize>, Vec<C64>) {
    let n = start.n();
    let use_c = !start.any_ep() && !cur.any_ep();
    let weight: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| {
                    if use_c {
                        cdot(start.left(j), cur.right(k)).norm()
                    } else {
                        hdot(start.right(j), cur.right(k)).norm() / (norm2(start.right(j)) * norm2(cur.right(k)))
                    }
                })
                .collect()
        })
        .collect();
    let perm = max_weight_assignment(&weight);
    let factors = (0..n).map(|k| cdot(start.left(perm[k]), cur.right(k))).collect();
    (perm, factors)
}

/// Transports all eigenpairs around a circle in the (p1, p2) plane for several cycles.
pub fn encircle<M: ParametricModel>(model: &M, spec: &EncircleSpec, opts: &SweepOptions) -> Result<CycleReport, SweepError> {
    spec.validate()?;
    opts.validate()?;
    let candidates_inside = model.ep_candidates(spec.p1, spec.p2).map(|c| {
        c.iter()
            .filter(|(x, y)| (x - spec.center.0).hypot(y - spec.center.1) < spec.radius)
            .count()
    });
    if let Some(count) = candidates_inside.filter(|&c| c >= 2) {
        return Err(SweepError::SecondEpInside { count });
    }
    let ctx = Ctx { model, spec, opts };
    let centre = evaluate(model, &[(spec.p1, spec.center.0), (spec.p2, spec.center.1)], opts)?;
    let start = ctx.eval(0.0)?;
    let n_steps = spec.steps_per_cycle;
    let mut contour = Vec::with_capacity(n_steps * spec.cycles + 1);
    let push_point = |contour: &mut Vec<ContourPoint>, s: usize, sys: &EigenSystem| {
        let (x, y) = spec.point(s as f64);
        contour.push(ContourPoint {
            step: s,
            theta: spec.theta(s as f64),
            p1: x,
            p2: y,
            values: sys.values().to_vec(),
        });
    };
    push_point(&mut contour, 0, &start);
    let mut cur = start.clone();
    let mut cycles: Vec<CycleRecord> = Vec::with_capacity(spec.cycles);
    let mut prev_map: (Vec<usize>, Vec<C64>) = ((0..start.n()).collect(), vec![C64::new(1.0, 0.0); start.n()]);
    let mut gauge: Option<(usize, C64)> = None;
    for s in 1..=n_steps * spec.cycles {
        let new = ctx.eval(s as f64)?;
        cur = ctx.transport(&cur, (s - 1) as f64, s as f64, &new, 0)?;
        push_point(&mut contour, s, &cur);
        if s % n_steps != 0 {
            continue;
        }
        let (perm, factors) = monodromy(&start, &cur);
        let n = perm.len();
        let mut per_cycle = vec![0usize; n];
        let mut per_factor = vec![C64::new(1.0, 0.0); n];
        for k in 0..n {
            per_cycle[prev_map.0[k]] = perm[k];
            per_factor[prev_map.0[k]] = factors[k] / prev_map.1[k];
        }
        if cycles.is_empty() {
            let moved: Vec<usize> = (0..n).filter(|&j| per_cycle[j] != j).collect();
            if moved.len() == 2 && per_cycle[moved[0]] == moved[1] {
                let (a, b) = (per_factor[moved[0]], per_factor[moved[1]]);
                gauge = Some((moved[1], (a / b).sqrt()));
            }
        }
        let scale_of = |j: usize| match gauge {
            Some((partner, lambda)) if partner == j => lambda,
            _ => C64::new(1.0, 0.0),
        };
        let symmetric_factors = (0..n).map(|k| scale_of(k) * factors[k] / scale_of(perm[k])).collect();
        cycles.push(CycleRecord {
            cycle: s / n_steps,
            permutation: perm.clone(),
            per_cycle_permutation: per_cycle,
            factors: factors.clone(),
            symmetric_factors,
        });
        prev_map = (perm, factors);
    }
    let identity = |p: &[usize]| p.iter().enumerate().all(|(k, &j)| k == j);
    let eigenvalue_period = cycles.iter().find(|c| identity(&c.permutation)).map(|c| c.cycle);
    let eigenvector_period = cycles
        .iter()
        .find(|c| identity(&c.permutation) && c.factors.iter().all(|f| (f - 1.0).norm() <= PHASE_TOL))
        .map(|c| c.cycle);
    let contour_gap = contour.iter().map(|p| min_gap(&p.values)).fold(f64::INFINITY, f64::min);
    Ok(CycleReport {
        cycles,
        eigenvalue_period,
        eigenvector_period,
        gauge_lambda: gauge.map(|g| g.1),
        encloses_candidate: min_gap(centre.values()) < contour_gap / 10.0,
        candidates_inside,
        contour,
    })
}
