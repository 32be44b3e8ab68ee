use serde::{Deserialize, Serialize};

use super::run::SweepRow;
use super::SweepOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    EnergyCrossing,
    WidthCrossing,
    AvoidedCrossing,
    EpCandidate,
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Interpolated parameter value of the event.
    pub param: f64,
    /// Trajectory indices involved.
    pub indices: Vec<usize>,
    /// Nearest row.
    pub row: usize,
    /// |z_i − z_j| at that row (Γ_k for BIC events).
    pub gap: f64,
}

fn sign(x: f64, band: f64) -> i8 {
    if x.abs() < band {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Sign changes of `d` outside a tolerance band, located by linear interpolation
/// (adjacent rows) or at the centre of the zero run between them.
fn sign_changes(params: &[f64], d: &[f64], band: f64) -> Vec<(f64, usize)> {
    let nonzero: Vec<usize> = (0..d.len()).filter(|&t| sign(d[t], band) != 0).collect();
    let mut out = Vec::new();
    for w in nonzero.windows(2) {
        let (a, b) = (w[0], w[1]);
        if sign(d[a], band) == sign(d[b], band) {
            continue;
        }
        if b == a + 1 {
            let p = params[a] + (params[b] - params[a]) * d[a] / (d[a] - d[b]);
            let row = if (p - params[a]).abs() <= (params[b] - p).abs() { a } else { b };
            out.push((p, row));
        } else {
            let (lo, hi) = (a + 1, b - 1);
            out.push((0.5 * (params[lo] + params[hi]), (lo + hi) / 2));
        }
    }
    out
}

/// Vertex of the parabola through three points, falling back to the middle abscissa.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d2 - d1) / (x[2] - x[0]);
    if curv <= 0.0 || !curv.is_finite() {
        return x[1];
    }
    let v = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curv);
    v.clamp(x[0].min(x[2]), x[0].max(x[2]))
}

pub(crate) fn detect_events(
    rows: &[SweepRow],
    scale: f64,
    window: Option<(f64, f64)>,
    opts: &SweepOptions,
) -> Vec<Event> {
    let mut events = Vec::new();
    if rows.is_empty() {
        return events;
    }
    let n = rows[0].values.len();
    let params: Vec<f64> = rows.iter().map(|r| r.param).collect();
    let band = opts.gap_tol * scale;
    let ep_tol = opts.ep_gap_tol * scale;
    for i in 0..n {
        for j in i + 1..n {
            let dre: Vec<f64> = rows.iter().map(|r| r.values[i].re - r.values[j].re).collect();
            let dim: Vec<f64> = rows.iter().map(|r| r.values[i].im - r.values[j].im).collect();
            let gap: Vec<f64> = rows.iter().map(|r| (r.values[i] - r.values[j]).norm()).collect();
            let energy = sign_changes(&params, &dre, band);
            for &(p, row) in &energy {
                events.push(Event {
                    kind: EventKind::EnergyCrossing,
                    param: p,
                    indices: vec![i, j],
                    row,
                    gap: gap[row],
                });
            }
            for (p, row) in sign_changes(&params, &dim, band) {
                events.push(Event {
                    kind: EventKind::WidthCrossing,
                    param: p,
                    indices: vec![i, j],
                    row,
                    gap: gap[row],
                });
            }
            // EP candidates: runs with a vanishing gap and collapsed rigidity.
            let mut t = 0;
            while t < rows.len() {
                let is_ep = |t: usize| {
                    gap[t] < ep_tol && (rows[t].ep_flag || rows[t].rigidity[i].min(rows[t].rigidity[j]) < 0.5)
                };
                if !is_ep(t) {
                    t += 1;
                    continue;
                }
                let start = t;
                while t < rows.len() && is_ep(t) {
                    t += 1;
                }
                let best = (start..t).min_by(|&a, &b| gap[a].total_cmp(&gap[b])).unwrap_or(start);
                events.push(Event {
                    kind: EventKind::EpCandidate,
                    param: params[best],
                    indices: vec![i, j],
                    row: best,
                    gap: gap[best],
                });
            }
            for t in 1..rows.len().saturating_sub(1) {
                if !(gap[t] < gap[t - 1] && gap[t] <= gap[t + 1] && gap[t] >= ep_tol) {
                    continue;
                }
                let (lo, hi) = (params[t - 1].min(params[t + 1]), params[t - 1].max(params[t + 1]));
                if energy.iter().any(|&(p, _)| p >= lo && p <= hi) {
                    continue;
                }
                events.push(Event {
                    kind: EventKind::AvoidedCrossing,
                    param: parabola_vertex([params[t - 1], params[t], params[t + 1]], [gap[t - 1], gap[t], gap[t + 1]]),
                    indices: vec![i, j],
                    row: t,
                    gap: gap[t],
                });
            }
        }
    }
    if let Some((lo, hi)) = window {
        let widths: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.values.iter().map(|z| -2.0 * z.im).collect())
            .collect();
        let gmax = widths.iter().flatten().cloned().fold(0.0, f64::max);
        if gmax > 0.0 {
            let tol = opts.bic_tol * gmax;
            for k in 0..n {
                let is_bic = |t: usize| {
                    let e = rows[t].values[k].re;
                    let others = widths[t].iter().enumerate().any(|(l, &g)| l != k && g > tol);
                    widths[t][k] < tol && e > lo && e < hi && others
                };
                let mut t = 0;
                while t < rows.len() {
                    if !is_bic(t) {
                        t += 1;
                        continue;
                    }
                    let start = t;
                    while t < rows.len() && is_bic(t) {
                        t += 1;
                    }
                    let best = (start..t)
                        .min_by(|&a, &b| widths[a][k].abs().total_cmp(&widths[b][k].abs()))
                        .unwrap_or(start);
                    events.push(Event {
                        kind: EventKind::Bic,
                        param: params[best],
                        indices: vec![k],
                        row: best,
                        gap: widths[best][k],
                    });
                }
            }
        }
    }
    events.sort_by(|a, b| a.param.total_cmp(&b.param).then(a.kind.cmp(&b.kind)).then(a.indices.cmp(&b.indices)));
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_change_interpolates() {
        let p = [0.0, 1.0, 2.0];
        let d = [1.0, 0.5, -0.5];
        let out = sign_changes(&p, &d, 1e-12);
        assert_eq!(out.len(), 1);
        assert!((out[0].0 - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_run_is_centred_and_end_runs_ignored() {
        let p = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(sign_changes(&p, &[1.0, 0.0, 0.0, 0.0, -1.0], 1e-9), vec![(2.0, 2)]);
        assert!(sign_changes(&p, &[1.0, 1.0, 0.0, 0.0, 0.0], 1e-9).is_empty());
        assert!(sign_changes(&p, &[0.0; 5], 1e-9).is_empty());
        assert!(sign_changes(&p, &[1.0, 0.0, 1.0, 2.0, 3.0], 1e-9).is_empty());
    }

    #[test]
    fn parabola_vertex_of_symmetric_points() {
        assert!((parabola_vertex([-1.0, 0.0, 1.0], [2.0, 1.0, 2.0])).abs() < 1e-15);
        assert!((parabola_vertex([0.0, 1.0, 2.0], [1.0, 0.0, 1.0]) - 1.0).abs() < 1e-15);
    }
}
