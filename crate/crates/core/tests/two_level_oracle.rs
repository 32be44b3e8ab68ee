use nhspec::linalg::{c_normalize, eig, C64};
use nhspec::two_level::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Roots of λ² − tr·λ + det = 0 by the quadratic formula.
fn quad_roots(m: &TwoLevelModel) -> [C64; 2] {
    let tr = m.eps1 + m.eps2;
    let det = m.eps1 * m.eps2 - m.omega * m.omega;
    let s = (tr * tr - 4.0 * det).sqrt();
    [(tr + s) * 0.5, (tr - s) * 0.5]
}

fn assert_same_set(a: [C64; 2], b: [C64; 2], tol: f64) {
    let direct = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let swapped = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    assert!(direct.min(swapped) < tol, "{a:?} vs {b:?}");
}

#[test]
fn eigenvalues_match_quadratic_formula() {
    let m = TwoLevelModel::new(c(1.0, -0.5), c(2.0, -0.1), c(0.3, 0.1));
    let (p, q, _) = eigenvalues(&m);
    assert_same_set([p, q], quad_roots(&m), 1e-14);
    let sys = eig(&m.matrix()).unwrap();
    assert_same_set([p, q], [sys.value(0), sys.value(1)], 1e-12);
}

#[test]
fn ep_locations_zero_z_by_substitution() {
    let (e1, e2) = (c(0.3, -0.2), c(-0.1, -0.7));
    let (wp, wm) = ep_locations(e1, e2).unwrap();
    for w in [wp, wm] {
        let d = e1 - e2;
        let z = 0.5 * (d * d + 4.0 * w * w).sqrt();
        assert!(z.norm() < 1e-14 * e1.norm().max(e2.norm()).max(1.0));
    }
}

#[test]
fn coalescence_near_ep() {
    let (e1, e2) = (c(1.0, 0.0), c(-1.0, 0.0));
    let (wp, _) = ep_locations(e1, e2).unwrap();
    let m = TwoLevelModel::new(e1, e2, wp + c(0.0, -1e-4));
    let r = coalescence_relation_check(&m).unwrap();
    assert!(r.deviation < 1e-2, "{r:?}");
    assert!(!r.within_tolerance);
}

#[test]
fn pt_threshold_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let gamma: f64 = rng.gen_range(0.0..2.0);
        let omega: f64 = rng.gen_range(-2.0..2.0);
        let s = pt_eigenvalues(&PtTwoLevelModel::new(0.1, gamma, omega).unwrap());
        let real = s.values.iter().all(|z| z.im == 0.0);
        assert_eq!(real, omega.abs() >= gamma / 2.0);
        assert_eq!(s.is_broken, !real);
    }
    // Boundary: just inside and outside by 1e-10.
    for gamma in [0.2, 1.0, 1.7] {
        let at = |w: f64| pt_eigenvalues(&PtTwoLevelModel::new(0.0, gamma, w).unwrap()).is_broken;
        assert!(!at(gamma / 2.0));
        assert!(!at(gamma / 2.0 + 1e-10));
        assert!(at(gamma / 2.0 - 1e-10));
    }
}

#[test]
fn pt_matches_eig() {
    let m = PtTwoLevelModel::new(0.4, 1.0, 0.3).unwrap();
    let s = pt_eigenvalues(&m);
    let sys = eig(&m.matrix()).unwrap();
    assert_same_set(s.values, [sys.value(0), sys.value(1)], 1e-12);
}

#[test]
fn source_residual_generic_and_near_ep() {
    let m = TwoLevelModel::from_widths(1.0, 0.4, 0.2, 0.1, c(0.3, 0.05)).unwrap();
    assert!(nonlinear_source_residual(&m).unwrap() < 1e-10);
    let (e1, e2) = (c(1.0, -0.2), c(-1.0, -0.6));
    let (wp, _) = ep_locations(e1, e2).unwrap();
    let near = TwoLevelModel::new(e1, e2, wp * (1.0 - 1e-3));
    let sys = c_normalize(&eig(&near.matrix()).unwrap(), None).unwrap();
    assert!(sys.norm_a(0).value() > 10.0);
    assert!(nonlinear_source_residual(&near).unwrap() < 1e-8);
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn base() -> AvoidedCrossingModel {
    AvoidedCrossingModel::new(Affine::new(0.0, 1.0), Affine::new(0.0, -1.0), 0.0, 0.0, c(0.1, 0.0)).unwrap()
}

#[test]
fn classify_discrete_and_free_and_avoided() {
    let g = grid(-1.0, 1.0, 101);
    assert_eq!(classify_crossing(&base(), &g).unwrap().kind, CrossingKind::DiscreteAvoided);
    let free = base().with_widths(2.0, 0.0).unwrap();
    let out = classify_crossing(&free, &g).unwrap();
    assert_eq!(out.kind, CrossingKind::FreeCrossing);
    // For real ω the critical width difference is 4|ω|.
    let (g1, g2) = out.gamma_cr.unwrap();
    assert!(((g1 - g2).abs() - 0.4).abs() < 1e-9);
    let avoided = base().with_widths(0.2, 0.0).unwrap();
    assert_eq!(classify_crossing(&avoided, &g).unwrap().kind, CrossingKind::AvoidedCrossing);
}

#[test]
fn classify_grid_not_bracketing() {
    let g = grid(0.5, 1.0, 11);
    assert_eq!(classify_crossing(&base(), &g), Err(TwoLevelError::GridTooCoarse));
}

#[test]
fn classify_exceptional_point_from_bisection_oracle() {
    // Oracle: bisection on γ₁ (γ₂ = 0) of the closed-form gap at a^cr until it drops below 1e-8.
    let m0 = base();
    let gap = |g1: f64| {
        let m = m0.with_widths(g1, 0.0).unwrap();
        let (p, q, _) = eigenvalues(&m.at(m.a_cr()));
        p - q
    };
    let (mut lo, mut hi) = (0.0, 2.0);
    let mut g1 = 1.0;
    for _ in 0..200 {
        g1 = 0.5 * (lo + hi);
        if gap(g1).norm() < 1e-8 {
            break;
        }
        // Energies cross (gap purely imaginary) above critical.
        if gap(g1).re.abs() < gap(g1).im.abs() {
            hi = g1;
        } else {
            lo = g1;
        }
    }
    assert!(gap(g1).norm() < 1e-8);
    let m = m0.with_widths(g1, 0.0).unwrap();
    let out = classify_crossing(&m, &grid(-1.0, 1.0, 101)).unwrap();
    assert_eq!(out.kind, CrossingKind::ExceptionalPoint, "{out:?}");
}

#[test]
fn delta_endpoints() {
    let free = base().with_widths(2.0, 0.0).unwrap();
    let d = delta_diagnostic(&free, free.a_cr()).unwrap();
    assert!(d.delta.iter().all(|x| (x - 1.0).abs() < 1e-6), "{d:?}");
    let avoided = base().with_widths(0.2, 0.0).unwrap();
    let d = delta_diagnostic(&avoided, avoided.a_cr()).unwrap();
    assert!(d.delta.iter().all(|x| x.abs() < 1e-6), "{d:?}");
    let d = delta_diagnostic(&base(), base().a_cr()).unwrap();
    for row in d.b_sq {
        assert!((row[0] - 0.5).abs() < 1e-6 && (row[1] - 0.5).abs() < 1e-6);
    }
    let ep = base().with_widths(0.4, 0.0).unwrap();
    let d = delta_diagnostic(&ep, ep.a_cr()).unwrap();
    assert!(d.flagged || d.delta.iter().all(|x| x.abs() < 1e-6));
}

#[test]
fn rigidity_collapses_toward_ep() {
    let (e1, e2) = (c(1.0, -0.3), c(-0.5, -0.1));
    let (wp, _) = ep_locations(e1, e2).unwrap();
    let r_at = |t: f64| {
        let sys = c_normalize(&eig(&TwoLevelModel::new(e1, e2, wp * t).matrix()).unwrap(), None).unwrap();
        sys.rigidity(0)
    };
    assert!(r_at(0.99) < r_at(0.5));
    let tiny = TwoLevelModel::new(e1, e2, wp / wp.norm() * 1e-8);
    let sys = c_normalize(&eig(&tiny.matrix()).unwrap(), None).unwrap();
    assert!(sys.rigidity(0) > 1.0 - 1e-6 && sys.rigidity(1) > 1.0 - 1e-6);
}

#[test]
fn width_bifurcation_beyond_ep() {
    // ε₁ − ε₂ real, ω imaginary beyond |ω_EP|: common energy, split widths.
    let (e1, e2) = (c(1.0, 0.0), c(-1.0, 0.0));
    let m = TwoLevelModel::new(e1, e2, c(0.0, 1.5));
    let (p, q, _) = eigenvalues(&m);
    assert!((p.re - q.re).abs() < 1e-14);
    assert!((p.im - q.im).abs() > 1e-3);
}

fn model_strategy() -> impl Strategy<Value = TwoLevelModel> {
    (-2.0..2.0f64, 0.0..2.0f64, -2.0..2.0f64, 0.0..2.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(e1, g1, e2, g2, wr, wi)| TwoLevelModel::from_widths(e1, g1, e2, g2, c(wr, wi)).unwrap())
}

proptest! {
    #[test]
    fn eigenvalue_sum_and_eig_agreement(m in model_strategy()) {
        let (p, q, _) = eigenvalues(&m);
        prop_assert!((p + q - (m.eps1 + m.eps2)).norm() <= 1e-15 * m.scale() * 4.0);
        let sys = eig(&m.matrix()).unwrap();
        let direct = (p - sys.value(0)).norm().max((q - sys.value(1)).norm());
        let swapped = (p - sys.value(1)).norm().max((q - sys.value(0)).norm());
        prop_assert!(direct.min(swapped) < 1e-12 * m.scale());
    }

    #[test]
    fn rigidity_in_unit_interval(m in model_strategy()) {
        let sys = c_normalize(&eig(&m.matrix()).unwrap(), None).unwrap();
        for k in 0..2 {
            prop_assert!((0.0..=1.0).contains(&sys.rigidity(k)));
        }
    }
}
