//! Property tests for the library's cross-module invariants.

use proptest::prelude::*;

use onebit::circulant::{top_k_norm, CirculantOperator};
use onebit::recover::{hard_threshold, project_l1_l2, project_sigma_s};
use onebit::rng::{sample_dither, sample_vector, Distribution, SeedTree};

fn finite_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, n..=n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_path_matches_naive(n in 2usize..=64, seed in 0u64..1_000_000) {
        let root = SeedTree::new(seed);
        let d = Distribution::gaussian(0.0, 1.0);
        let xi = sample_vector(&d, n, &root.child(0)).unwrap();
        let z = sample_vector(&d, n, &root.child(1)).unwrap();
        let op = CirculantOperator::new(xi, (0..n).collect(), n).unwrap();
        let fast = op.circ_apply(&z).unwrap();
        let slow = op.circ_apply_naive(&z).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn adjoint_identity(n in 2usize..=64, seed in 0u64..1_000_000) {
        let root = SeedTree::new(seed);
        let d = Distribution::gaussian(0.0, 1.0);
        let xi = sample_vector(&d, n, &root.child(0)).unwrap();
        let m = 1 + n / 2;
        let rows = onebit::rng::sample_selectors(n, m, &root.child(1)).unwrap();
        let op = CirculantOperator::new(xi, rows.clone(), m).unwrap();
        let z = sample_vector(&d, n, &root.child(2)).unwrap();
        if rows.is_empty() {
            return Ok(());
        }
        let w = sample_vector(&d, rows.len(), &root.child(3)).unwrap();
        let az = op.apply(&z).unwrap();
        let atw = op.adjoint(&w).unwrap();
        let lhs: f64 = az.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = z.iter().zip(&atw).map(|(a, b)| a * b).sum();
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() / scale < 1e-10);
    }

    #[test]
    fn top_k_monotone_and_caps_at_l2(v in finite_vec(24)) {
        let l2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut prev = 0.0;
        for k in 1..=24 {
            let t = top_k_norm(&v, k).unwrap();
            prop_assert!(t + 1e-12 >= prev);
            prop_assert!(t <= l2 * (1.0 + 1e-12));
            prev = t;
        }
        prop_assert!((prev - l2).abs() <= 1e-9 * l2.max(1.0));
    }

    #[test]
    fn hard_threshold_keeps_s_largest(v in finite_vec(16), s in 1usize..=16) {
        let h = hard_threshold(&v, s).unwrap();
        let nnz = h.iter().filter(|&&x| x != 0.0).count();
        prop_assert!(nnz <= s);
        // Every kept magnitude dominates every dropped one.
        let kept_min = h.iter().filter(|&&x| x != 0.0).map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let dropped_max = v
            .iter()
            .zip(&h)
            .filter(|(_, &hv)| hv == 0.0)
            .map(|(x, _)| x.abs())
            .fold(0.0f64, f64::max);
        prop_assert!(nnz == 0 || kept_min >= dropped_max);
    }

    #[test]
    fn projections_are_feasible_and_idempotent(v in finite_vec(20), s in 1usize..=6) {
        let p = project_sigma_s(&v, s).unwrap();
        let nnz = p.iter().filter(|&&x| x != 0.0).count();
        prop_assert!(nnz <= s);
        prop_assert!(p.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 1e-9);
        let pp = project_sigma_s(&p, s).unwrap();
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() < 1e-12);
        }

        let q = project_l1_l2(&v, s).unwrap();
        prop_assert!(q.iter().map(|x| x.abs()).sum::<f64>() <= (s as f64).sqrt() * (1.0 + 1e-9));
        prop_assert!(q.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 1e-9);
        let qq = project_l1_l2(&q, s).unwrap();
        for (a, b) in q.iter().zip(&qq) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn seed_paths_reproducible(master in 0u64..u64::MAX, a in 0u64..1000, b in 0u64..1000) {
        let s1 = SeedTree::new(master).child(a).child(b);
        let s2 = SeedTree::new(master).child(a).child(b);
        let d1 = sample_dither(16, 1.0, &s1).unwrap();
        let d2 = sample_dither(16, 1.0, &s2).unwrap();
        prop_assert_eq!(d1, d2);
    }
}
