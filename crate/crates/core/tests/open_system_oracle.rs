use std::f64::consts::PI;

use nhspec::linalg::{c_normalize, cdot, eig, hdot, C64};
use nhspec::open_system::*;
use nhspec::two_level::TwoLevelModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Composite Simpson on [a, b] with `n` (even) intervals.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Principal value by pairing E ± t: ∫₀^d (f(E−t) − f(E+t))/t dt plus the regular remainder.
fn pv_oracle(f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64, l: f64, h: f64, e: f64, n: usize) -> f64 {
    let d = (e - l).min(h - e);
    let sym = |t: f64| if t == 0.0 { -2.0 * df(e) } else { (f(e - t) - f(e + t)) / t };
    let mut v = simpson(&sym, 0.0, d, n);
    let rest = |x: f64| f(x) / (e - x);
    if e - l > d {
        v += simpson(&rest, l, e - d, n);
    } else if h - e > d {
        v += simpson(&rest, e + d, h, n);
    }
    v
}

#[test]
fn pv_linear_function_matches_oracle() {
    let v = pv_integral(&|x| x, (-1.0, 1.0), 101, 0.3).unwrap();
    let oracle = pv_oracle(&|x| x, &|_| 1.0, -1.0, 1.0, 0.3, 1_000_000);
    assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    assert!((oracle - (-2.0 + 0.3 * (1.3f64 / 0.7).ln())).abs() < 1e-9);
}

#[test]
fn pv_converges_at_second_order() {
    let f = |x: f64| (3.0 * x).cos() + x * x * x;
    let df = |x: f64| -3.0 * (3.0 * x).sin() + 3.0 * x * x;
    for e in [0.3, -0.4137] {
        let oracle = pv_oracle(&f, &df, -1.0, 1.0, e, 1_000_000);
        let errs: Vec<f64> = [101, 201, 401, 801]
            .iter()
            .map(|&m| (pv_integral(&f, (-1.0, 1.0), m, e).unwrap() - oracle).abs())
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] / w[1] >= 3.5, "E = {e}: errors {errs:?}");
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng, n: usize, ch: usize, window: (f64, f64)) -> OpenSystemModel {
    let e_b: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            v[i][j] = rng.gen_range(-0.1..0.1);
            v[j][i] = v[i][j];
        }
    }
    let amplitudes = (0..n).map(|_| (0..ch).map(|_| rng.gen_range(-0.4..0.4)).collect()).collect();
    OpenSystemModel::new(e_b, Some(v), CouplingProfile::Constant { amplitudes }, window, 401).unwrap()
}

#[test]
fn tabulated_heff_matches_direct_quadrature() {
    let window = (-1.0, 1.0);
    let energies: Vec<f64> = (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect();
    let tab = |k: usize, x: f64| if k == 0 { 0.3 + 0.2 * x } else { 0.5 - 0.3 * x * x };
    let values = energies.iter().map(|&x| vec![vec![tab(0, x)], vec![tab(1, x)]]).collect();
    let m = OpenSystemModel::new(
        vec![-0.2, 0.35],
        Some(vec![vec![0.0, 0.05], vec![0.05, 0.0]]),
        CouplingProfile::Table {
            energies: energies.clone(),
            values,
        },
        window,
        4001,
    )
    .unwrap();
    // Piecewise-linear interpolant of the table, rebuilt independently.
    let interp = move |k: usize, x: f64| {
        let s = ((x + 1.0) / 0.25).floor().clamp(0.0, 7.0) as usize;
        let (a, b) = (-1.0 + 0.25 * s as f64, -1.0 + 0.25 * (s + 1) as f64);
        tab(k, a) + (x - a) / (b - a) * (tab(k, b) - tab(k, a))
    };
    let e = 0.1234;
    let h = assemble_heff(&m, e).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let f = |x: f64| interp(i, x) * interp(j, x);
            let df = |x: f64| (f(x + 1e-7) - f(x - 1e-7)) / 2e-7;
            let shift = pv_oracle(&f, &df, -1.0, 1.0, e, 400_000) / (2.0 * PI);
            let v = if i == j { [-0.2, 0.35][i] } else { 0.05 };
            let want = c(v + shift, -0.5 * interp(i, e) * interp(j, e));
            assert!((h.matrix.get(i, j) - want).norm() < 1e-5, "({i},{j}) {} vs {want}", h.matrix.get(i, j));
        }
    }
}

/// Eigenvalues of the 2×2 H_eff with constant coupling, from the closed-form log shift.
fn heff2_values(e_b: [f64; 2], v12: f64, g: [f64; 2], window: (f64, f64), e: f64) -> [C64; 2] {
    let lg = ((e - window.0) / (window.1 - e)).ln() / (2.0 * PI);
    let m = |i: usize, j: usize| {
        let base = if i == j { e_b[i] } else { v12 };
        c(base + g[i] * g[j] * lg, -0.5 * g[i] * g[j])
    };
    let (a, b, d) = (m(0, 0), m(0, 1), m(1, 1));
    let z = (((a - d) * 0.5).powi(2) + b * b).sqrt();
    [(a + d) * 0.5 - z, (a + d) * 0.5 + z]
}

#[test]
fn self_consistent_energies_match_root_finder() {
    let (e_b, v12, g, window) = ([-0.1, 0.15], 0.04, [0.5, 0.4], (-2.0, 2.0));
    let m = OpenSystemModel::new(
        e_b.to_vec(),
        Some(vec![vec![0.0, v12], vec![v12, 0.0]]),
        CouplingProfile::Constant {
            amplitudes: vec![vec![g[0]], vec![g[1]]],
        },
        window,
        1001,
    )
    .unwrap();
    let states = solve_resonances(&m, &ResonanceOptions::default()).unwrap();
    for s in &states {
        assert!(s.converged, "{s:?}");
        // Root of Re z(E) − E on the branch closest to the solver's state.
        let pick = |e: f64| {
            let v = heff2_values(e_b, v12, g, window, e);
            if (v[0] - s.z).norm() < (v[1] - s.z).norm() { v[0] } else { v[1] }
        };
        let (mut lo, mut hi) = (s.energy - 0.05, s.energy + 0.05);
        let gfun = |e: f64| pick(e).re - e;
        assert!(gfun(lo) * gfun(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gfun(lo) * gfun(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((s.energy - root).abs() < 1e-6);
        assert!((s.z - pick(root)).norm() < 1e-6, "{} vs {}", s.z, pick(root));
    }
}

#[test]
fn states_outside_window_are_bound() {
    let m = OpenSystemModel::new(
        vec![-0.2, 3.0],
        Some(vec![vec![0.0, 0.1], vec![0.1, 0.0]]),
        CouplingProfile::Constant {
            amplitudes: vec![vec![0.3], vec![0.2]],
        },
        (-1.0, 1.0),
        801,
    )
    .unwrap();
    let states = solve_resonances(&m, &ResonanceOptions::default()).unwrap();
    let outside = states.iter().find(|s| !s.in_window).expect("one state above the window");
    assert!(outside.converged);
    assert_eq!(outside.width(), 0.0);
    assert!(outside.phi.iter().all(|x| x.im == 0.0));
    assert!((hdot(&outside.phi, &outside.phi).re - 1.0).abs() < 1e-12);
    let inside = states.iter().find(|s| s.in_window).unwrap();
    assert!(inside.width() > 0.0);
}

#[test]
fn rigidity_of_separated_and_overlapping_resonances() {
    let two = |e_b: [f64; 2], g: f64| {
        OpenSystemModel::new(
            e_b.to_vec(),
            None,
            CouplingProfile::Constant {
                amplitudes: vec![vec![g], vec![g]],
            },
            (-5.0, 5.0),
            2001,
        )
        .unwrap()
    };
    let opts = ResonanceOptions::default();
    let sep = solve_resonances(&two([-1.0, 1.0], 0.1), &opts).unwrap();
    let peak = sep.iter().map(|s| s.z.re).fold(f64::INFINITY, f64::min);
    assert!(interior_rigidity(&sep, peak, 0).rho > 0.99);
    // Level spacing just above the width-bifurcation point d = g²/2.
    let ov = solve_resonances(&two([-0.6, 0.6], 1.0), &opts).unwrap();
    let min_rho = (0..=400)
        .map(|k| interior_rigidity(&ov, -2.0 + 0.01 * k as f64, 0).rho)
        .fold(1.0, f64::min);
    assert!(min_rho < 0.5, "min rho {min_rho}");
    // Past the bifurcation both states keep distinct poles.
    let past = solve_resonances(&two([-0.24, 0.24], 1.0), &opts).unwrap();
    assert!((past[0].z - past[1].z).norm() > 0.5, "{:?}", past.iter().map(|s| s.z).collect::<Vec<_>>());
}

#[test]
fn mixing_without_coupling_is_identity() {
    let m = TwoLevelModel::new(c(0.5, -0.1), c(-0.3, -0.2), c(0.0, 0.0));
    let sys = c_normalize(&eig(&m.matrix()).unwrap(), None).unwrap();
    let basis = basis_vectors(MixingBasis::UnperturbedNoncoupled, &m.matrix()).unwrap();
    let r = mixing_coefficients(&sys, &basis);
    // eigenvalues are sorted by real part: state 0 is ε2.
    assert!((r.coefficients[0][1] - 1.0).norm() < 1e-15 && r.coefficients[0][0].norm() < 1e-15);
    assert!((r.coefficients[1][0] - 1.0).norm() < 1e-15 && r.coefficients[1][1].norm() < 1e-15);
}

#[test]
fn mixing_diverges_near_ep_but_keeps_sum_rule() {
    let m = TwoLevelModel::new(c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0 - 1e-13));
    let sys = c_normalize(&eig(&m.matrix()).unwrap(), None).unwrap();
    let basis = basis_vectors(MixingBasis::UnperturbedNoncoupled, &m.matrix()).unwrap();
    let r = mixing_coefficients(&sys, &basis);
    assert!(r.max_abs > 1e3, "{}", r.max_abs);
    assert!(r.sum_rule_residual < 1e-6, "{}", r.sum_rule_residual);
}

#[test]
fn mixing_sum_rule_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let m = random_model(&mut rng, 4, 2, (-1.0, 1.0));
        let h = assemble_heff(&m, rng.gen_range(-0.5..0.5)).unwrap();
        let sys = c_normalize(&eig(&h.matrix).unwrap(), None).unwrap();
        for basis in [MixingBasis::UnperturbedNoncoupled, MixingBasis::BoundBasis] {
            let r = mixing_coefficients(&sys, &basis_vectors(basis, &m.h_b()).unwrap());
            assert!(r.sum_rule_residual < 1e-9, "{basis:?}: {}", r.sum_rule_residual);
        }
    }
}

#[test]
fn chain_trapping() {
    let model = ToyTrappingModel::linear_chain(10);
    let grid = |n: usize| -> Vec<f64> { (0..=n).map(|k| 40.0 * k as f64 / n as f64).collect() };
    let r = toy_trapping(&model, &grid(80), &TrappingOptions::default()).unwrap();
    assert!(r.max_width_sum_residual < 1e-9);
    assert!(r.max_trace_residual < 1e-9);
    assert!(r.max_imag <= 1e-12);
    let fit = r.fit.unwrap();
    assert!(fit.relative_residual < 0.01, "{fit:?}");
    assert!(r.others_non_increasing);
    assert!(!r.trapped[r.broadest]);
    let long: Vec<f64> = (0..=200).map(|k| 2.0 * k as f64).collect();
    let far = toy_trapping(&model, &long, &TrappingOptions::default()).unwrap();
    assert_eq!(far.trapped.iter().filter(|&&t| t).count(), 20);
    let fine = toy_trapping(&model, &grid(160), &TrappingOptions::default()).unwrap();
    let (a, b) = (r.alpha_cr.unwrap(), fine.alpha_cr.unwrap());
    assert!((a - b).abs() <= 0.05 * b, "{a} vs {b}");
}

#[test]
fn strong_coupling_traps_all_but_c_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.gen_range(3..=12);
        let ch = rng.gen_range(1..=3.min(n - 1));
        let h0 = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = (0..n).map(|_| (0..ch).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let m = ToyTrappingModel::new(h0, v).unwrap();
        let big = 1e3 * (n as f64);
        let r = toy_trapping(&m, &[big, 2.0 * big], &TrappingOptions::default()).unwrap();
        let growing = (0..n).filter(|&k| r.widths[1][k] > 1.9 * r.widths[0][k]).count();
        let settled = (0..n).filter(|&k| r.widths[1][k] < 1.1 * r.widths[0][k]).count();
        assert_eq!(growing, ch, "n = {n}, C = {ch}");
        assert_eq!(settled, n - ch);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn widths_nonnegative_and_biorthogonal(seed in any::<u64>(), n in 2usize..6, ch in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, n, ch, (-1.0, 1.0));
        let e = rng.gen_range(-0.9..0.9);
        let h = assemble_heff(&m, e).unwrap();
        let sys = c_normalize(&eig(&h.matrix).unwrap(), None).unwrap();
        for k in 0..n {
            prop_assert!(-2.0 * sys.value(k).im >= -1e-10);
            for l in 0..n {
                let d = if k == l { 1.0 } else { 0.0 };
                prop_assert!((cdot(sys.right(k), sys.right(l)) - d).norm() < 1e-9);
            }
        }
        prop_assert!(h.channels.len() <= m.n_channels());
        for s in solve_resonances(&m, &ResonanceOptions::default()).unwrap() {
            prop_assert!(s.width() >= -1e-10);
        }
    }

    #[test]
    fn heff_outside_window_is_real(seed in any::<u64>(), e in prop_oneof![-3.0..-1.1f64, 1.1..3.0f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 3, 2, (-1.0, 1.0));
        let h = assemble_heff(&m, e).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!(h.matrix.get(i, j).im == 0.0);
                prop_assert!((h.matrix.get(i, j) - h.matrix.get(j, i)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn toy_trace_identity(seed in any::<u64>(), alpha in 0.0..50.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=8);
        let h0 = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let v = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let m = ToyTrappingModel::new(h0, v).unwrap();
        let r = toy_trapping(&m, &[0.0, alpha.max(1e-3)], &TrappingOptions::default()).unwrap();
        prop_assert!(r.max_trace_residual < 1e-9 * (1.0 + alpha));
        prop_assert!(r.max_imag <= 1e-12 * (1.0 + alpha));
    }
}
