use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

/// 17 significant digits; −0 is written as 0.
pub fn num(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| io_err(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), CliError> {
    let mut s = String::new();
    for v in values {
        s.push_str(&serde_json::to_string(v).map_err(|e| io_err(path, e))?);
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

pub struct Series {
    pub points: Vec<(f64, f64)>,
}

pub struct Panel {
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 720.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Stacked line plots sharing the x axis.
pub fn svg_panels(x_label: &str, panels: &[Panel]) -> String {
    let height = MARGIN + panels.len() as f64 * (PANEL_H + MARGIN);
    let (x0, x1) = bounds(panels.iter().flat_map(|p| p.series.iter().flat_map(|s| s.points.iter().map(|q| q.0))));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{height}\" fill=\"white\"/>");
    let plot_w = WIDTH - 2.0 * MARGIN;
    for (i, panel) in panels.iter().enumerate() {
        let top = MARGIN + i as f64 * (PANEL_H + MARGIN);
        let (y0, y1) = bounds(panel.series.iter().flat_map(|s| s.points.iter().map(|q| q.1)));
        let _ = writeln!(
            s,
            "<rect x=\"{MARGIN}\" y=\"{top}\" width=\"{plot_w}\" height=\"{PANEL_H}\" fill=\"none\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            s,
            "<text x=\"12\" y=\"{:.1}\" transform=\"rotate(-90 12 {:.1})\" text-anchor=\"middle\">{}</text>",
            top + 0.5 * PANEL_H,
            top + 0.5 * PANEL_H,
            panel.y_label
        );
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{y1:.4e}</text>", MARGIN - 4.0, top + 10.0);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{y0:.4e}</text>", MARGIN - 4.0, top + PANEL_H);
        for (k, series) in panel.series.iter().enumerate() {
            let mut d = String::new();
            for &(x, y) in series.points.iter().filter(|q| q.0.is_finite() && q.1.is_finite()) {
                let px = MARGIN + plot_w * (x - x0) / (x1 - x0);
                let py = top + PANEL_H * (1.0 - (y - y0) / (y1 - y0));
                let _ = write!(d, "{}{px:.2},{py:.2}", if d.is_empty() { "M" } else { " L" });
            }
            if !d.is_empty() {
                let _ = writeln!(
                    s,
                    "<path d=\"{d}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>",
                    COLORS[k % COLORS.len()]
                );
            }
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{MARGIN}\" y=\"{:.1}\">{x0:.4e}</text><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{x1:.4e}</text>",
        height - 20.0,
        WIDTH - MARGIN,
        height - 20.0
    );
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label}</text>", WIDTH / 2.0, height - 20.0);
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, x_label: &str, panels: &[Panel]) -> Result<(), CliError> {
    fs::write(path, svg_panels(x_label, panels)).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn svg_is_deterministic() {
        let p = || {
            vec![Panel {
                y_label: "y".into(),
                series: vec![Series {
                    points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)],
                }],
            }]
        };
        let a = svg_panels("x", &p());
        assert_eq!(a, svg_panels("x", &p()));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    }
}
