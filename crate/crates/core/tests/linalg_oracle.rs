use nhspec::linalg::{c_normalize, cdot, eig, jordan_chain, ComplexMatrix, Symmetry, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Characteristic polynomial coefficients via Faddeev–LeVerrier.
/// Returns p with det(zI − A) = Σ p[k] z^(n−k), p[0] = 1.
fn charpoly(n: usize, a: &[C64]) -> Vec<C64> {
    let mut p = vec![c(1.0, 0.0)];
    let mut m = vec![c(0.0, 0.0); n * n];
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{k−1}·I
        let mut next = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                next[i * n + j] = (0..n).map(|l| a[i * n + l] * m[l * n + j]).sum();
            }
            next[i * n + i] += p[k - 1];
        }
        m = next;
        let am_trace: C64 = (0..n)
            .map(|i| (0..n).map(|l| a[i * n + l] * m[l * n + i]).sum::<C64>())
            .sum();
        p.push(-am_trace / k as f64);
    }
    p
}

/// Durand–Kerner simultaneous root iteration, refined by Newton.
fn poly_roots(p: &[C64]) -> Vec<C64> {
    let n = p.len() - 1;
    let eval = |z: C64| p.iter().fold(c(0.0, 0.0), |acc, &ck| acc * z + ck);
    let deriv = |z: C64| {
        p.iter()
            .take(n)
            .enumerate()
            .fold(c(0.0, 0.0), |acc, (i, &ck)| acc * z + ck * (n - i) as f64)
    };
    let radius = 1.0 + p.iter().skip(1).map(|z| z.norm()).fold(0.0, f64::max);
    let mut roots: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = c(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = deriv(*r);
            if d.norm() > 0.0 {
                *r -= eval(*r) / d;
            }
        }
    }
    roots
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, sym: Symmetry) -> ComplexMatrix {
    let mut data = vec![c(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    if sym == Symmetry::ComplexSymmetric {
        for i in 0..n {
            for j in 0..i {
                data[i * n + j] = data[j * n + i];
            }
        }
    }
    ComplexMatrix::new(n, data, sym).unwrap()
}

#[test]
fn random_5x5_matches_charpoly_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let h = random_matrix(&mut rng, 5, Symmetry::General);
        let roots = poly_roots(&charpoly(5, h.data()));
        let sys = eig(&h).unwrap();
        let mut used = [false; 5];
        for z in sys.values() {
            let (j, d) = roots
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, r)| (j, (r - z).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            used[j] = true;
            assert!(d < 1e-8, "eigenvalue {z} off by {d}");
        }
    }
}

#[test]
fn c_normalize_matches_closed_form_2x2() {
    // ε1 = 1 − 0.5i, ε2 = 2 − 0.1i, ω = 0.3
    let (e1, e2, w) = (c(1.0, -0.5), c(2.0, -0.1), c(0.3, 0.0));
    let h = ComplexMatrix::from_rows(&[vec![e1, w], vec![w, e2]], Symmetry::ComplexSymmetric).unwrap();
    let sys = c_normalize(&eig(&h).unwrap(), None).unwrap();
    // Oracle: eigenvector (ω, λ − ε1) with λ the quadratic-formula root.
    let disc = ((e1 - e2) * (e1 - e2) + w * w * 4.0).sqrt();
    for lam in [(e1 + e2 + disc) * 0.5, (e1 + e2 - disc) * 0.5] {
        let v = [w, lam - e1];
        let cn = v[0] * v[0] + v[1] * v[1];
        let hn = v[0].norm_sqr() + v[1].norm_sqr();
        let a_oracle = hn / cn.norm();
        let k = (0..2)
            .min_by(|&i, &j| (sys.value(i) - lam).norm().total_cmp(&(sys.value(j) - lam).norm()))
            .unwrap();
        assert!((sys.value(k) - lam).norm() < 1e-14);
        assert!((sys.norm_a(k).value() - a_oracle).abs() < 1e-12);
        assert!((sys.rigidity(k) - 1.0 / a_oracle).abs() < 1e-12);
    }
}

#[test]
fn c_normalize_near_ep_has_large_a() {
    // T(ς) = [[1, ς], [ς, −1]] with ς a distance 1e-5 from the EP at ς = i.
    let s = c(0.0, 1.0 - 1e-5);
    let h = ComplexMatrix::from_rows(
        &[vec![c(1.0, 0.0), s], vec![s, c(-1.0, 0.0)]],
        Symmetry::ComplexSymmetric,
    )
    .unwrap();
    let sys = c_normalize(&eig(&h).unwrap(), None).unwrap();
    for k in 0..2 {
        assert!(!sys.ep_flag(k));
        assert!(sys.norm_a(k).value() > 1e2);
        assert!(sys.rigidity(k) < 1e-2);
    }
}

#[test]
fn jordan_chain_at_constructed_ep() {
    let (e1, e2) = (c(0.3, -0.2), c(-0.1, -0.7));
    let w = c(0.0, 1.0) * (e1 - e2) * 0.5;
    let h = ComplexMatrix::from_rows(&[vec![e1, w], vec![w, e2]], Symmetry::ComplexSymmetric).unwrap();
    let ch = jordan_chain(&h, (e1 + e2) * 0.5).unwrap();
    assert!(ch.residual_cr < 1e-8);
    assert!(ch.residual_cra < 1e-8);
}

fn matrix_strategy(sym: Symmetry) -> impl Strategy<Value = ComplexMatrix> {
    (1usize..=8, any::<u64>()).prop_map(move |(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_matrix(&mut rng, n, sym)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trace_identity(h in matrix_strategy(Symmetry::General)) {
        let sys = eig(&h).unwrap();
        let sum: C64 = sys.values().iter().sum();
        let tol = 1e-9 * h.n() as f64 * h.max_abs();
        prop_assert!((sum - h.trace()).norm() <= tol);
    }

    #[test]
    fn residual_bound(h in matrix_strategy(Symmetry::General)) {
        let sys = eig(&h).unwrap();
        let hn = h.frobenius();
        for k in 0..sys.n() {
            if !sys.ep_flag(k) {
                prop_assert!(sys.residual(k) <= 1e-9 * hn);
            }
        }
    }

    #[test]
    fn complex_symmetric_c_orthogonality(h in matrix_strategy(Symmetry::ComplexSymmetric)) {
        let sys = eig(&h).unwrap();
        for k in 0..sys.n() {
            for l in 0..sys.n() {
                if k != l {
                    prop_assert!(cdot(sys.right(k), sys.right(l)).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn biorthonormal_after_c_normalize(h in matrix_strategy(Symmetry::ComplexSymmetric)) {
        let sys = c_normalize(&eig(&h).unwrap(), None).unwrap();
        for k in 0..sys.n() {
            prop_assert!(sys.norm_a(k).value() >= 1.0 - 1e-9);
            prop_assert!((sys.rigidity(k) - 1.0 / sys.norm_a(k).value()).abs() < 1e-12);
            prop_assert!(sys.rigidity(k) >= 0.0 && sys.rigidity(k) <= 1.0);
            for l in 0..sys.n() {
                let want = if k == l { 1.0 } else { 0.0 };
                prop_assert!((cdot(sys.left(k), sys.right(l)) - C64::new(want, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn c_normalize_idempotent(h in matrix_strategy(Symmetry::ComplexSymmetric)) {
        let once = c_normalize(&eig(&h).unwrap(), None).unwrap();
        let twice = c_normalize(&once, None).unwrap();
        for k in 0..once.n() {
            for (a, b) in once.right(k).iter().zip(twice.right(k)) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
