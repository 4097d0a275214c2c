use pronk_eval::{linspace, mean_std};
use proptest::prelude::*;

proptest! {
    #[test]
    fn linspace_hits_endpoints_and_is_evenly_spaced(lo in -10.0f64..10.0, span in 0.01f64..10.0, n in 2usize..200) {
        let hi = lo + span;
        let xs = linspace(lo, hi, n);
        prop_assert_eq!(xs.len(), n);
        prop_assert_eq!(xs[0], lo);
        prop_assert!((xs[n - 1] - hi).abs() <= 1e-12);
        let h = span / (n - 1) as f64;
        for w in xs.windows(2) {
            prop_assert!((w[1] - w[0] - h).abs() <= 1e-12);
        }
    }

    #[test]
    fn std_is_shift_invariant_and_scales(xs in prop::collection::vec(-5.0f64..5.0, 2..60), shift in -100.0f64..100.0, k in 0.1f64..10.0) {
        let (m, s) = mean_std(&xs);
        let moved: Vec<f64> = xs.iter().map(|x| k * x + shift).collect();
        let (m2, s2) = mean_std(&moved);
        prop_assert!((m2 - (k * m + shift)).abs() <= 1e-9);
        prop_assert!((s2 - k * s).abs() <= 1e-9 * (1.0 + k * s));
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
        prop_assert!(s <= hi - lo + 1e-12);
    }
}
