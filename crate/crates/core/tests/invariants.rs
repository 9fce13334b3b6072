//! Property suites for the refinement stage and the metrics.

mod common;

use common::*;
use depthforge::depth::{BitMask, DepthMap};
use depthforge::metrics::{delta_k, kendall_tau_slices, rmse};
use depthforge::refine::fit_scale_shift;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ok(check: Check) -> Result<(), TestCaseError> {
    check.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn propagation_masks_grow_and_fills_are_convex(seed in any::<u64>(), gamma in 0.0f64..=1.0, win in prop::sample::select(vec![3usize, 5, 7, 13])) {
        ok(check_propagation(seed, gamma, win))?;
    }

    #[test]
    fn opening_is_anti_extensive_idempotent_and_increasing(seed in any::<u64>(), radius in 0usize..=3) {
        ok(check_opening(seed, radius))?;
    }

    #[test]
    fn certainty_mask_is_monotone_in_eps(seed in any::<u64>(), e1 in 0.0f64..0.5, e2 in 0.0f64..0.5) {
        ok(check_certainty_monotone(seed, e1, e2))?;
    }

    #[test]
    fn stage2_is_scale_shift_equivariant(seed in any::<u64>(), a in 0.1f64..10.0, b in 0.0f64..5.0) {
        ok(check_equivariance(seed, a, b))?;
    }

    #[test]
    fn stage2_is_deterministic(seed in any::<u64>()) {
        ok(check_determinism(seed))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scale_shift_fit_beats_perturbations(seed in any::<u64>()) {
        let c = case(seed);
        let Ok(fit) = fit_scale_shift(&c.depth, &c.mu, &c.mask) else { return Ok(()); };
        let resid = |a: f64, b: f64| -> f64 {
            c.mask.ones().iter().map(|&i| (a * c.mu.data()[i] + b - c.depth.values()[i]).powi(2)).sum()
        };
        let best = resid(fit.a, fit.b);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let a = fit.a + rng.random_range(-1.0..1.0);
            let b = fit.b + rng.random_range(-1.0..1.0);
            prop_assert!(best <= resid(a, b) * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn metric_properties(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let dx = DepthMap::from_vec(1, n, x.clone()).unwrap();
        let dy = DepthMap::from_vec(1, n, y.clone()).unwrap();
        let m = BitMask::filled(1, n, true);
        prop_assert_eq!(rmse(&dx, &dy, &m).unwrap(), rmse(&dy, &dx, &m).unwrap());
        prop_assert_eq!(rmse(&dx, &dx, &m).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in [1.05, 1.25, 1.5625, 2.0, 10.0, 1e9] {
            let d = delta_k(&dx, &dy, &m, k).unwrap();
            prop_assert!(d >= prev);
            prev = d;
        }
        prop_assert_eq!(prev, 1.0);
        let t = kendall_tau_slices(&x, &y).unwrap();
        let cube: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let lin: Vec<f64> = y.iter().map(|v| 2.0 * v + 1.0).collect();
        prop_assert_eq!(kendall_tau_slices(&cube, &lin).unwrap(), t);
    }
}
