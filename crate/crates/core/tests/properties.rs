use proptest::prelude::*;

use birthmark::birthmark::{dilation, long_time_overlap};
use birthmark::ensembles::{dirichlet_with, stream_rng};
use birthmark::estimator::{merge, EstimatorResult};
use birthmark::moments::analytic_moments;
use birthmark::{sample_dirichlet, SymmetryClass, WeightVector};

fn class() -> impl Strategy<Value = SymmetryClass> {
    prop_oneof![Just(SymmetryClass::Gue), Just(SymmetryClass::Goe)]
}

proptest! {
    #[test]
    fn sampled_weights_are_normalized(c in class(), n in 1usize..200, seed in any::<u64>()) {
        let w = sample_dirichlet(c, n, seed).unwrap();
        prop_assert_eq!(w.dim(), n);
        prop_assert!(w.as_slice().iter().all(|&p| p >= 0.0));
        let s: f64 = w.as_slice().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dilation_has_ergodic_floor(c in class(), n in 1usize..200, seed in any::<u64>()) {
        let w = sample_dirichlet(c, n, seed).unwrap();
        prop_assert!(dilation(&w) >= 1.0 / n as f64 - 1e-12);
        prop_assert!(dilation(&w) <= 1.0 + 1e-12);
    }

    #[test]
    fn self_overlap_is_dilation(c in class(), n in 1usize..100, seed in any::<u64>()) {
        let w = sample_dirichlet(c, n, seed).unwrap();
        prop_assert_eq!(long_time_overlap(&w, &w).unwrap(), dilation(&w));
    }

    #[test]
    fn cross_overlap_bounded_by_dilations(c in class(), n in 1usize..100, seed in any::<u64>()) {
        let a = sample_dirichlet(c, n, seed).unwrap();
        let b = sample_dirichlet(c, n, seed ^ 0x9e37_79b9).unwrap();
        let ab = long_time_overlap(&a, &b).unwrap();
        prop_assert!(ab * ab <= dilation(&a) * dilation(&b) + 1e-15);
    }

    #[test]
    fn normalization_identity(c in class(), n in 1usize..100_000) {
        let r = analytic_moments(c, n).unwrap().normalization_residual();
        prop_assert!(r.abs() < 1e-12);
    }

    #[test]
    fn merge_ignores_order(seed in any::<u64>(), parts in 2usize..20, rot in 0usize..20) {
        let mut rng = stream_rng(seed, 0);
        let partials: Vec<EstimatorResult> = (0..parts)
            .map(|_| (0..50).map(|_| dilation(&dirichlet_with(SymmetryClass::Goe, 6, &mut rng))).collect())
            .collect();
        let mut rotated = partials.clone();
        rotated.rotate_left(rot % parts);
        let a = merge(&partials).unwrap();
        let b = merge(&rotated).unwrap();
        prop_assert_eq!(a.count, b.count);
        prop_assert!((a.mean() - b.mean()).abs() < 1e-12);
        prop_assert!((a.stderr() - b.stderr()).abs() < 1e-12);
    }

    #[test]
    fn weight_vector_rejects_bad_input(v in prop::collection::vec(0.0f64..1.0, 1..20), k in 0usize..20) {
        let mut bad = v.clone();
        let i = k % bad.len();
        bad[i] = -0.5;
        prop_assert!(WeightVector::new(bad).is_err());
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            prop_assert!(WeightVector::new(v).is_err());
        }
    }
}
