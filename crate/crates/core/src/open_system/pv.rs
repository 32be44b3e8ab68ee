use super::{grid, OpenSystemError};

/// ∫ (f(E′) − f(E))/(E − E′) dE′ by the trapezoid rule on `nodes`, plus the analytic
/// remainder f(E)·ln|E − l|/|E − h|. At a node coinciding with E the integrand is −f′(E).
pub(crate) fn subtracted(fvals: &[f64], nodes: &[f64], fe: f64, dfe: f64, window: (f64, f64), e: f64) -> f64 {
    let m = nodes.len();
    let cell = (window.1 - window.0) / (m - 1) as f64;
    let mut sum = 0.0;
    for k in 0..m {
        let d = e - nodes[k];
        let g = if d.abs() <= 1e-12 * cell { -dfe } else { (fvals[k] - fe) / d };
        let w = if k == 0 || k + 1 == m { 0.5 } else { 1.0 };
        sum += w * g;
    }
    sum * cell + fe * ((e - window.0).abs() / (e - window.1).abs()).ln()
}

pub(crate) fn check_threshold(window: (f64, f64), m: usize, e: f64) -> Result<(), OpenSystemError> {
    if !e.is_finite() {
        return Err(OpenSystemError::OutsideWindow {
            energy: e,
            low: window.0,
            high: window.1,
        });
    }
    let half = 0.5 * (window.1 - window.0) / (m - 1) as f64;
    if (e - window.0).abs() < half || (e - window.1).abs() < half {
        return Err(OpenSystemError::TooCloseToThreshold { energy: e });
    }
    Ok(())
}

fn check_grid(window: (f64, f64), m: usize) -> Result<(), OpenSystemError> {
    if m < 3 || !(window.0 < window.1) {
        return Err(OpenSystemError::InvalidModel("need low < high and at least 3 grid points".into()));
    }
    Ok(())
}

/// ∫_l^h f(E′)/(E − E′) dE′ on an M-point uniform grid for any E not within half a cell
/// of a threshold: a principal value inside the window, an ordinary integral outside.
pub fn window_integral(f: &dyn Fn(f64) -> f64, window: (f64, f64), m: usize, e: f64) -> Result<f64, OpenSystemError> {
    check_grid(window, m)?;
    check_threshold(window, m, e)?;
    let nodes = grid(window, m);
    let fvals: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    let h = 0.25 * (window.1 - window.0) / (m - 1) as f64;
    let dfe = (f(e + h) - f(e - h)) / (2.0 * h);
    Ok(subtracted(&fvals, &nodes, f(e), dfe, window, e))
}

/// Principal value P∫_l^h f(E′)/(E − E′) dE′ by the subtraction method; O(M⁻²).
pub fn pv_integral(f: &dyn Fn(f64) -> f64, window: (f64, f64), m: usize, e: f64) -> Result<f64, OpenSystemError> {
    check_grid(window, m)?;
    if !(e > window.0 && e < window.1) {
        return Err(OpenSystemError::OutsideWindow {
            energy: e,
            low: window.0,
            high: window.1,
        });
    }
    window_integral(f, window, m, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_constant_vanishes() {
        assert!(pv_integral(&|_| 1.0, (-1.0, 1.0), 101, 0.0).unwrap().abs() < 1e-12);
        assert!(pv_integral(&|_| 1.0, (0.0, 2.0), 101, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_gives_log() {
        // P∫_{-1}^{1} dE′/(0.5 − E′) = ln(1.5/0.5)
        let v = pv_integral(&|_| 1.0, (-1.0, 1.0), 11, 0.5).unwrap();
        assert!((v - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn threshold_errors() {
        assert!(matches!(
            pv_integral(&|_| 1.0, (-1.0, 1.0), 11, 1.5),
            Err(OpenSystemError::OutsideWindow { .. })
        ));
        assert!(matches!(
            pv_integral(&|_| 1.0, (-1.0, 1.0), 11, 0.95),
            Err(OpenSystemError::TooCloseToThreshold { .. })
        ));
        assert!(window_integral(&|_| 1.0, (-1.0, 1.0), 11, 1.5).is_ok());
    }
}
