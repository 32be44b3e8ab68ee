use serde::{Deserialize, Serialize};

use super::events::{detect_events, Event};
use super::{evaluate, match_systems, near_ep, run_parallel, Matched, ParamPath, ParametricModel, SweepError, SweepOptions};
use crate::linalg::{EigenSystem, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: ParamPath,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    #[serde(default)]
    pub adaptive: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.steps < 2 {
            return Err(SweepError::InvalidSpec("steps must be >= 2".into()));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(SweepError::InvalidSpec("start and stop must be finite".into()));
        }
        if self.start == self.stop {
            return Err(SweepError::InvalidSpec("start must differ from stop".into()));
        }
        Ok(())
    }

    /// Grid point k; the endpoints are hit exactly.
    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.steps {
            return self.stop;
        }
        self.start + (self.stop - self.start) * (k as f64) / ((self.steps - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub values: Vec<C64>,
    /// A_k; +∞ where the pair is flagged as an EP.
    pub norms_a: Vec<f64>,
    pub rigidity: Vec<f64>,
    pub min_gap: f64,
    pub ep_flag: bool,
    /// Row inserted by adaptive refinement.
    pub refined: bool,
    /// Matching accepted with overlap below threshold next to an EP.
    pub ambiguous: bool,
    /// perm[k] = index in the (Re, Im)-sorted eigenvalue list carried by trajectory k.
    pub perm: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: ParamPath,
    pub rows: Vec<SweepRow>,
    pub events: Vec<Event>,
    pub scale: f64,
    systems: Vec<EigenSystem>,
}

impl SweepResult {
    /// Matched eigensystem of each row.
    pub fn systems(&self) -> &[EigenSystem] {
        &self.systems
    }
}

struct Step {
    param: f64,
    matched: Matched,
    refined: bool,
    ambiguous: bool,
}

struct Ctx<'a, M> {
    model: &'a M,
    path: ParamPath,
    opts: &'a SweepOptions,
    adaptive: bool,
}

fn match_interval<M: ParametricModel>(
    ctx: &Ctx<'_, M>,
    prev: &EigenSystem,
    p0: f64,
    p1: f64,
    new: &EigenSystem,
    depth: u32,
) -> Result<Vec<Step>, SweepError> {
    let m = match_systems(prev, new)?;
    if m.min_overlap >= ctx.opts.min_overlap {
        return Ok(vec![Step {
            param: p1,
            matched: m,
            refined: false,
            ambiguous: false,
        }]);
    }
    let flagged = prev.any_ep() || new.any_ep();
    if ctx.adaptive && depth < ctx.opts.max_refine_depth && !flagged {
        let mid = 0.5 * (p0 + p1);
        let mid_sys = evaluate(ctx.model, &[(ctx.path, mid)], ctx.opts)?;
        let mut left = match_interval(ctx, prev, p0, mid, &mid_sys, depth + 1)?;
        if let Some(last) = left.last_mut() {
            last.refined = true;
        }
        let anchor = left.last().map(|s| s.matched.sys.clone()).unwrap_or(mid_sys);
        let right = match_interval(ctx, &anchor, mid, p1, new, depth + 1)?;
        left.extend(right);
        return Ok(left);
    }
    if flagged || (ctx.adaptive && (near_ep(prev) || near_ep(new))) {
        return Ok(vec![Step {
            param: p1,
            matched: m,
            refined: false,
            ambiguous: true,
        }]);
    }
    Err(SweepError::MatchingAmbiguous {
        param: p1,
        overlap: m.min_overlap,
    })
}

fn min_gap(values: &[C64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            g = g.min((values[i] - values[j]).norm());
        }
    }
    g
}

fn make_row(param: f64, sys: &EigenSystem, perm: Vec<usize>, refined: bool, ambiguous: bool) -> SweepRow {
    SweepRow {
        param,
        values: sys.values().to_vec(),
        norms_a: sys.norms_a().iter().map(|a| a.value()).collect(),
        rigidity: sys.rigidities().to_vec(),
        min_gap: min_gap(sys.values()),
        ep_flag: sys.any_ep(),
        refined,
        ambiguous,
        perm,
    }
}

/// Continues all eigenpairs of `model` along `spec.parameter`.
///
/// Grid points are diagonalized in parallel (`opts.workers`), then matched in one ordered
/// pass so that the output does not depend on the worker count.
pub fn sweep<M: ParametricModel>(model: &M, spec: &SweepSpec, opts: &SweepOptions) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    opts.validate()?;
    model.get(spec.parameter)?;
    let raw: Vec<Result<EigenSystem, SweepError>> =
        run_parallel(opts.workers, spec.steps, |k| evaluate(model, &[(spec.parameter, spec.point(k))], opts));
    let raw: Vec<EigenSystem> = raw.into_iter().collect::<Result<_, _>>()?;
    let ctx = Ctx {
        model,
        path: spec.parameter,
        opts,
        adaptive: spec.adaptive,
    };
    let n = raw[0].n();
    let mut rows = vec![make_row(spec.point(0), &raw[0], (0..n).collect(), false, false)];
    let mut systems = vec![raw[0].clone()];
    for k in 1..spec.steps {
        let prev = systems.last().expect("at least one row").clone();
        let steps = match_interval(&ctx, &prev, rows.last().map(|r| r.param).unwrap_or(spec.start), spec.point(k), &raw[k], 0)?;
        for s in steps {
            rows.push(make_row(s.param, &s.matched.sys, s.matched.perm.clone(), s.refined, s.ambiguous));
            systems.push(s.matched.sys);
        }
    }
    let scale = rows
        .iter()
        .flat_map(|r| r.values.iter().map(|z| z.norm()))
        .fold(1.0, f64::max);
    let events = detect_events(&rows, scale, model.coupling_window(), opts);
    Ok(SweepResult {
        parameter: spec.parameter,
        rows,
        events,
        scale,
        systems,
    })
}
