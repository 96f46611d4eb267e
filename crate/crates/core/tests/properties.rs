//! Invariants over seeded random fields, through the public API.

use momray_core::johnop::{canonical_chains, john_residuals_exact, sample_points};
use momray_core::planar2d::{complex_to_real, real_to_complex};
use momray_core::reduction::{check_reduction_properties, reduce_via_transport};
use momray_core::xray::sample_ts_points;
use momray_core::{GaussField, MomentumDataSet, TransformRep};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn json_round_trip_preserves_transforms(seed in 0u64..1000, m in 0usize..3, n in 2usize..5) {
        let f = GaussField::random(m, n, seed, 2).unwrap();
        let g = GaussField::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(&f, &g);
        for p in sample_ts_points(n, 3, 1.0, seed) {
            prop_assert_eq!(
                momray_core::xray::ray_transform_i(m, &f, &p).unwrap(),
                momray_core::xray::ray_transform_i(m, &g, &p).unwrap()
            );
        }
    }

    #[test]
    fn transforms_have_parity(seed in 0u64..1000, m in 0usize..3, n in 2usize..5) {
        let f = GaussField::random(m, n, seed, 2).unwrap();
        let data = MomentumDataSet::from_field(&f);
        prop_assert!(data.evenness_residual(&sample_ts_points(n, 5, 1.0, seed)).unwrap() < 1e-12);
    }

    #[test]
    fn john_chains_annihilate(seed in 0u64..1000, m in 0usize..2) {
        let f = GaussField::random(m, 3, seed, 2).unwrap();
        let rep = TransformRep::transform(m, &f);
        let res = john_residuals_exact(&rep, &canonical_chains(3, m + 1), &sample_points(3, 4, seed)).unwrap();
        prop_assert!(res.iter().all(|r| r.max_rel < 1e-10));
    }

    #[test]
    fn reduced_functions_satisfy_range_properties(seed in 0u64..1000, i in 0usize..3) {
        let f = GaussField::random(1, 3, seed, 2).unwrap();
        let psi = reduce_via_transport(&TransformRep::transform(1, &f), &[i]).unwrap();
        let props = check_reduction_properties(&psi, &sample_points(3, 4, seed)).unwrap();
        prop_assert!(props.max() < 1e-10, "{:?}", props);
    }

    #[test]
    fn planar_components_round_trip(seed in 0u64..1000, m in 0usize..4) {
        let f = GaussField::random(m, 2, seed, 2).unwrap();
        let back = complex_to_real(&real_to_complex(&f).unwrap()).unwrap();
        for (x, _) in sample_points(2, 4, seed) {
            let a = f.evaluate(&x).unwrap();
            let b = back.evaluate(&x).unwrap();
            for (u, v) in a.components().iter().zip(b.components()) {
                prop_assert!((u - v).norm() < 1e-12);
            }
        }
    }
}
