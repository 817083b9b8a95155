use lpgroth::asymptotics::{gse_transform, gse_transform_inverse};
use lpgroth::linalg::{
    gershgorin_psd_certificate, hs_norm, is_psd, loewner_leq, pd_perturbation_threshold, sqrt_psd, trace_product, GramMatrix, SymMatrix,
};
use lpgroth::model::{grad_hamiltonian, hamiltonian, norm_p2, overlap, pnorm_pow_sum, sample_disorder, self_overlap, SpinConfig};
use lpgroth::parisi::{
    recursion, terminal_inf, DiscreteMeasure, FnTerminal, LagrangeMultiplier, ParisiDocument, Path, QuadratureSpec,
};
use proptest::prelude::*;

fn psd_from(k: usize, rank: usize, entries: &[f64]) -> GramMatrix {
    // B Bᵀ with B a k × rank block of the given entries.
    let b = |i: usize, j: usize| entries[(i * rank + j) % entries.len()];
    let data = (0..k * k).map(|ij| (0..rank).map(|l| b(ij / k, l) * b(ij % k, l)).sum()).collect();
    GramMatrix::from_rows(k, data).unwrap()
}

fn psd_strategy() -> impl Strategy<Value = GramMatrix> {
    (1usize..=6)
        .prop_flat_map(|k| (Just(k), 1..=k, prop::collection::vec(-2.0f64..2.0, 36)))
        .prop_map(|(k, rank, e)| psd_from(k, rank, &e))
}

fn psd_triple() -> impl Strategy<Value = (GramMatrix, GramMatrix, GramMatrix)> {
    (1usize..=6).prop_flat_map(|k| {
        (
            prop::collection::vec(-2.0f64..2.0, 36),
            prop::collection::vec(-2.0f64..2.0, 36),
            prop::collection::vec(-2.0f64..2.0, 36),
            1..=k,
            1..=k,
            1..=k,
        )
            .prop_map(move |(a, b, c, ra, rb, rc)| {
                let a = psd_from(k, ra, &a);
                let b = psd_from(k, rb, &b);
                let extra = psd_from(k, rc, &c);
                let c = GramMatrix::new(b.sym().add(extra.sym()).unwrap()).unwrap();
                (a, b, c)
            })
    })
}

fn config_strategy(max_n: usize, max_kappa: usize) -> impl Strategy<Value = SpinConfig> {
    (1..=max_n, 1..=max_kappa).prop_flat_map(|(n, k)| {
        prop::collection::vec(-3.0f64..3.0, n * k).prop_map(move |v| SpinConfig::new(n, k, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hs_norm_at_most_trace(m in psd_strategy()) {
        prop_assert!(hs_norm(m.sym()) <= m.trace() + 1e-10 * (1.0 + m.trace()));
    }

    #[test]
    fn loewner_order_preserves_traces((a, b, c) in psd_triple()) {
        prop_assume!(loewner_leq(&b, &c, 1e-10).unwrap());
        prop_assert!(trace_product(a.sym(), b.sym()).unwrap() <= trace_product(a.sym(), c.sym()).unwrap() + 1e-10);
        prop_assert!(hs_norm(b.sym()) <= hs_norm(c.sym()) + 1e-10);
    }

    #[test]
    fn gershgorin_implies_psd(k in 1usize..=6, e in prop::collection::vec(-3.0f64..3.0, 36)) {
        let m = SymMatrix::new(k, e[..k * k].to_vec()).unwrap();
        if gershgorin_psd_certificate(&m) {
            prop_assert!(is_psd(&m, 1e-10).unwrap());
        }
    }

    #[test]
    fn sqrt_round_trip(m in psd_strategy()) {
        let r = sqrt_psd(&m).unwrap();
        let sq = r.sym().to_matrix().matmul(&r.sym().to_matrix()).unwrap();
        let err = sq.sub(&m.sym().to_matrix()).unwrap().max_abs();
        prop_assert!(err <= 1e-10 * (1.0 + m.sym().max_abs()), "err {err}");
    }

    #[test]
    fn perturbation_below_threshold_stays_pd(
        k in 1usize..=6,
        a in prop::collection::vec(-2.0f64..2.0, 36),
        p in prop::collection::vec(-2.0f64..2.0, 36),
        frac in 0.0f64..0.999,
    ) {
        let base = psd_from(k, k, &a);
        let a = GramMatrix::new(base.sym().add(&SymMatrix::identity(k).scale(0.1)).unwrap()).unwrap();
        let p = SymMatrix::new(k, p[..k * k].to_vec()).unwrap();
        let eps = frac * pd_perturbation_threshold(&a, &p).unwrap().min(1e6);
        prop_assert!(is_psd(&a.sym().add(&p.scale(eps)).unwrap(), 0.0).unwrap());
    }

    #[test]
    fn self_overlap_is_psd_with_small_hs_norm(s in config_strategy(12, 4)) {
        let r = self_overlap(&s);
        prop_assert!(is_psd(r.sym(), 1e-10).unwrap());
        prop_assert!(hs_norm(r.sym()) <= r.trace() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn gradient_euler_identity(s in config_strategy(24, 3), seed in 0u64..1000, pi in 0usize..3, t in 0.1f64..2.0) {
        let p = [2.5, 3.0, 4.0][pi];
        let g = sample_disorder(seed, s.n()).unwrap();
        let h = hamiltonian(&g, &s).unwrap();
        let grad = grad_hamiltonian(&g, &s, p, t).unwrap();
        let lhs: f64 = grad.data().iter().zip(s.data()).map(|(a, b)| a * b).sum();
        let rhs = 2.0 * h - t * p * pnorm_pow_sum(&s, p);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + h.abs() + t * p * pnorm_pow_sum(&s, p)));
    }

    #[test]
    fn norm_is_homogeneous(s in config_strategy(12, 3), c in 0.1f64..5.0, p in 1.2f64..4.0) {
        let a = norm_p2(&s.scaled(c), p, true).unwrap();
        let b = c * norm_p2(&s, p, true).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn terminal_sup_property(lam in -1.0f64..1.0, x in -5.0f64..5.0, sigma in -4.0f64..4.0, p in 2.2f64..4.0) {
        let l = LagrangeMultiplier::scalar(lam).unwrap();
        let (v, arg) = terminal_inf(&l, p, 1.0, &[x]).unwrap();
        let g = x * sigma + lam * sigma * sigma - sigma.abs().powf(p);
        prop_assert!(v >= 0.0);
        prop_assert!(v >= g - 1e-12 * (1.0 + g.abs()));
        let radius = lpgroth::parisi::argmax_radius(&l, p, 1.0, &[x]);
        prop_assert!(arg[0].abs() <= radius * (1.0 + 1e-12));
    }

    #[test]
    fn terminal_midpoint_convexity(lam in -1.0f64..1.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let l = LagrangeMultiplier::scalar(lam).unwrap();
        let f = |x: f64| terminal_inf(&l, 3.0, 1.0, &[x]).unwrap().0;
        let mid = f(0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (f(a) + f(b)) + 1e-8 * (1.0 + mid.abs()));
    }

    #[test]
    fn transform_round_trip(l in 1e-3f64..1e3, p in 2.1f64..6.0, t in 0.1f64..10.0) {
        let g = gse_transform(l, p, t).unwrap();
        let back = gse_transform_inverse(g, p, t).unwrap();
        prop_assert!((back - l).abs() <= 1e-12 * l * 10.0);
    }

    #[test]
    fn document_round_trip(a in 0.0f64..1.0, b in 0.0f64..1.0, scale in 0.1f64..3.0, lam in -1.0f64..1.0, q in 0.05f64..0.95) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let d = GramMatrix::scaled_identity(1, scale).unwrap();
        let mid = GramMatrix::scaled_identity(1, scale * q).unwrap();
        let path = Path::new(vec![0.0, q, 1.0], vec![GramMatrix::zeros(1), mid, d]).unwrap();
        let w = DiscreteMeasure::finite(vec![lo, hi, hi + 1.0]).unwrap();
        let l = LagrangeMultiplier::scalar(lam).unwrap();
        let doc = ParisiDocument::from_parts(&l, &w, &path).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        let back: ParisiDocument = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        let (l2, w2, p2) = back.into_parts().unwrap();
        prop_assert_eq!(l2, l);
        prop_assert_eq!(w2, w);
        prop_assert_eq!(p2.knots(), path.knots());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn recursion_monotone_in_layer_weight(z1 in 0.0f64..4.0, z2 in 0.0f64..4.0, c in 0.1f64..1.0) {
        let term = FnTerminal { kappa: 1, f: move |x: &[f64]| (x[0] + 0.3).abs() + c * x[0] * x[0] };
        let path = Path::single_level(GramMatrix::scaled_identity(1, 0.5).unwrap());
        let quad = QuadratureSpec::grid(48);
        let (lo, hi) = if z1 < z2 { (z1, z2) } else { (z2, z1) };
        let a = recursion(&term, &[lo], &path, &quad).unwrap().value;
        let b = recursion(&term, &[hi], &path, &quad).unwrap().value;
        prop_assert!(a <= b + 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn recursion_continuous_at_zero_weight() {
    let term = FnTerminal { kappa: 1, f: |x: &[f64]| x[0].abs() + 0.2 * x[0] * x[0] };
    let path = Path::single_level(GramMatrix::identity(1));
    let quad = QuadratureSpec::grid(64);
    let at_zero = recursion(&term, &[0.0], &path, &quad).unwrap().value;
    let near = recursion(&term, &[1e-7], &path, &quad).unwrap().value;
    assert!((near - at_zero).abs() < 1e-6, "{near} vs {at_zero}");
}

/// `E H(σ¹)H(σ²) = N‖R(σ¹,σ²)‖²_HS` within five standard errors over 10⁴
/// disorder draws.
#[test]
fn hamiltonian_covariance_matches_overlap() {
    let (n, kappa) = (6, 2);
    let s1 = SpinConfig::new(n, kappa, (0..n * kappa).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.6).collect()).unwrap();
    let s2 = SpinConfig::new(n, kappa, (0..n * kappa).map(|i| ((i * 3 % 7) as f64 - 3.0) * 0.4).collect()).unwrap();
    let r = overlap(&s1, &s2).unwrap();
    let expected = n as f64 * r.data().iter().map(|v| v * v).sum::<f64>();
    let reps = 10_000;
    let prods: Vec<f64> = (0..reps)
        .map(|k| {
            let g = lpgroth::model::sample_disorder_replica(17, k, n).unwrap();
            hamiltonian(&g, &s1).unwrap() * hamiltonian(&g, &s2).unwrap()
        })
        .collect();
    let mean = prods.iter().sum::<f64>() / reps as f64;
    let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - expected).abs() <= 5.0 * se, "mean {mean}, expected {expected}, se {se}");
}
