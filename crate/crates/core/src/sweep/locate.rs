use serde::{Deserialize, Serialize};

use super::{ParamPath, ParametricModel, SweepError};
use crate::linalg::{eig, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocateOptions {
    /// Success when the gap falls below this fraction of the spectral scale.
    pub gap_tol: f64,
    /// After the simplex phase, a best gap above this fraction of the scale means no basin was found.
    pub basin_tol: f64,
    /// Initial simplex edge, relative to max(1, |seed|).
    pub simplex_step: f64,
    pub max_simplex_iter: usize,
    pub max_newton_iter: usize,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-10,
            basin_tol: 1e-3,
            simplex_step: 0.05,
            max_simplex_iter: 2000,
            max_newton_iter: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergedBy {
    /// gap < gap_tol·scale.
    Tolerance,
    /// Newton stalled with |D| at the level of rounding noise (≈ ε·scale²); the gap
    /// is then limited by the √ε conditioning of a defective eigenvalue.
    RoundingFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpLocation {
    pub p1: f64,
    pub p2: f64,
    pub z0: C64,
    pub gap: f64,
    /// |D| with D = (z_i − z_j)² (closed form for 2×2).
    pub discriminant: f64,
    pub scale: f64,
    pub converged_by: ConvergedBy,
    pub pair: (usize, usize),
    pub simplex_iterations: usize,
    pub newton_iterations: usize,
}

struct Probe {
    d: C64,
    z0: C64,
    scale: f64,
    pair: (usize, usize),
}

fn probe<M: ParametricModel>(model: &M, p1: ParamPath, p2: ParamPath, x: [f64; 2]) -> Result<Probe, SweepError> {
    let mut m = model.clone();
    m.set(p1, x[0])?;
    m.set(p2, x[1])?;
    let h = m.matrix()?;
    if h.n() == 2 {
        let (a, b, c, d) = (h.get(0, 0), h.get(0, 1), h.get(1, 0), h.get(1, 1));
        let disc = (a - d) * (a - d) + 4.0 * b * c;
        let z0 = 0.5 * (a + d);
        return Ok(Probe {
            d: disc,
            z0,
            scale: (z0.norm() + 0.5 * disc.norm().sqrt()).max(1.0),
            pair: (0, 1),
        });
    }
    if h.n() < 2 {
        return Err(SweepError::InvalidSpec("EP search needs at least two states".into()));
    }
    let sys = eig(&h)?;
    let v = sys.values();
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let g = (v[i] - v[j]).norm();
            if g < best.2 {
                best = (i, j, g);
            }
        }
    }
    let (i, j, _) = best;
    let diff = v[i] - v[j];
    Ok(Probe {
        d: diff * diff,
        z0: 0.5 * (v[i] + v[j]),
        scale: v.iter().map(|z| z.norm()).fold(1.0, f64::max),
        pair: (i, j),
    })
}

fn nelder_mead(
    f: &dyn Fn([f64; 2]) -> Result<f64, SweepError>,
    seed: [f64; 2],
    step: f64,
    max_iter: usize,
    target: f64,
) -> Result<([f64; 2], f64, usize), SweepError> {
    let mut pts = [seed, [seed[0] + step, seed[1]], [seed[0], seed[1] + step]];
    let mut vals = [f(pts[0])?, f(pts[1])?, f(pts[2])?];
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        if vals[b] <= target {
            break;
        }
        let diam = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]))
            .fold(0.0, f64::max);
        let size = 1.0 + pts[b][0].abs().max(pts[b][1].abs());
        if diam < 1e-15 * size {
            break;
        }
        let cen = [0.5 * (pts[b][0] + pts[m][0]), 0.5 * (pts[b][1] + pts[m][1])];
        let along = |t: f64| [cen[0] + t * (pts[w][0] - cen[0]), cen[1] + t * (pts[w][1] - cen[1])];
        let xr = along(-1.0);
        let fr = f(xr)?;
        if fr < vals[b] {
            let xe = along(-2.0);
            let fe = f(xe)?;
            if fe < fr {
                pts[w] = xe;
                vals[w] = fe;
            } else {
                pts[w] = xr;
                vals[w] = fr;
            }
        } else if fr < vals[m] {
            pts[w] = xr;
            vals[w] = fr;
        } else {
            let (xc, fc) = if fr < vals[w] {
                let x = along(-0.5);
                (x, f(x)?)
            } else {
                let x = along(0.5);
                (x, f(x)?)
            };
            if fc < vals[w].min(fr) {
                pts[w] = xc;
                vals[w] = fc;
            } else {
                for k in [m, w] {
                    pts[k] = [0.5 * (pts[b][0] + pts[k][0]), 0.5 * (pts[b][1] + pts[k][1])];
                    vals[k] = f(pts[k])?;
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Ok((pts[best], vals[best], iter))
}

/// Finds a point in the (p1, p2) plane where two eigenvalues coalesce.
///
/// A simplex search on |D| brings the iterate into the basin; Newton on (Re D, Im D)
/// with a central-difference Jacobian then polishes it. D is analytic near the EP,
/// whereas the gap itself has a square-root cusp there.
pub fn locate_ep<M: ParametricModel>(
    model: &M,
    p1: ParamPath,
    p2: ParamPath,
    seed: (f64, f64),
    opts: &LocateOptions,
) -> Result<EpLocation, SweepError> {
    if p1 == p2 {
        return Err(SweepError::InvalidSpec("p1 and p2 must differ".into()));
    }
    model.get(p1)?;
    model.get(p2)?;
    let seed = [seed.0, seed.1];
    let absd = |x: [f64; 2]| -> Result<f64, SweepError> { Ok(probe(model, p1, p2, x)?.d.norm()) };
    let scale0 = probe(model, p1, p2, seed)?.scale;
    let step = opts.simplex_step * seed[0].hypot(seed[1]).max(1.0);
    let target = (opts.gap_tol * scale0).powi(2);
    let (mut x, fbest, nm_iter) = nelder_mead(&absd, seed, step, opts.max_simplex_iter, target)?;
    let nm_gap = fbest.sqrt();
    if nm_gap > opts.basin_tol * scale0 {
        return Err(SweepError::NoConvergence {
            p1: x[0],
            p2: x[1],
            gap: nm_gap,
        });
    }
    let mut cur = probe(model, p1, p2, x)?;
    let mut newton_iter = 0;
    for _ in 0..opts.max_newton_iter {
        if cur.d.norm().sqrt() < opts.gap_tol * cur.scale {
            break;
        }
        newton_iter += 1;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * x[k].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let dd = (probe(model, p1, p2, xp)?.d - probe(model, p1, p2, xm)?.d) / (2.0 * h);
            jac[0][k] = dd.re;
            jac[1][k] = dd.im;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let (fr, fi) = (cur.d.re, cur.d.im);
        let dx = [
            -(jac[1][1] * fr - jac[0][1] * fi) / det,
            -(-jac[1][0] * fr + jac[0][0] * fi) / det,
        ];
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let xn = [x[0] + t * dx[0], x[1] + t * dx[1]];
            let pn = probe(model, p1, p2, xn)?;
            if pn.d.norm() < cur.d.norm() {
                x = xn;
                cur = pn;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let gap = cur.d.norm().sqrt();
    let converged_by = if gap < opts.gap_tol * cur.scale {
        ConvergedBy::Tolerance
    } else if cur.d.norm() <= 1e3 * f64::EPSILON * cur.scale * cur.scale {
        ConvergedBy::RoundingFloor
    } else {
        return Err(SweepError::SaddleRejected { p1: x[0], p2: x[1], gap });
    };
    Ok(EpLocation {
        p1: x[0],
        p2: x[1],
        z0: cur.z0,
        gap,
        discriminant: cur.d.norm(),
        scale: cur.scale,
        converged_by,
        pair: cur.pair,
        simplex_iterations: nm_iter,
        newton_iterations: newton_iter,
    })
}
