//! Randomized invariants over the public API.

use gldp_core::convex::ConvexPenalty;
use gldp_core::gcore::{g_function, sublinear_expectation, ScenarioSamples, VolBounds};
use gldp_core::paths::{build_g_path, make_time_grid, qv_increments_within, scenario_family};
use proptest::prelude::*;

fn penalty_strategy() -> impl Strategy<Value = ConvexPenalty> {
    prop_oneof![
        Just(ConvexPenalty::zero()),
        (0.1f64..3.0).prop_map(|k| ConvexPenalty::abs_scaled(k).unwrap()),
        (0.1f64..3.0).prop_map(|k| ConvexPenalty::quadratic(k).unwrap()),
        (-4.0f64..-0.1, 0.1f64..4.0)
            .prop_map(|(lo, hi)| ConvexPenalty::indicator(lo, hi).unwrap()),
    ]
}

proptest! {
    #[test]
    fn prox_is_firmly_nonexpansive(
        p in penalty_strategy(),
        y1 in -20.0f64..20.0,
        y2 in -20.0f64..20.0,
        lam in 1e-4f64..10.0,
    ) {
        let x1 = p.prox(lam, y1).unwrap();
        let x2 = p.prox(lam, y2).unwrap();
        let dx = x1 - x2;
        let dy = y1 - y2;
        prop_assert!(dx * dx <= dx * dy + 1e-12 * (1.0 + dy.abs()));
    }

    #[test]
    fn prox_pairs_certify_themselves(
        p in penalty_strategy(),
        y in -15.0f64..15.0,
        lam in 1e-3f64..5.0,
    ) {
        let (x, u) = p.prox_pair(lam, y).unwrap();
        let probes = p.standard_probes(x);
        prop_assert!(p.subgradient_residual(x, u, &probes) <= 1e-10);
    }

    #[test]
    fn worst_case_mean_dominates_and_shifts(
        base in prop::collection::vec(-5.0f64..5.0, 8..40),
        shift in -3.0f64..3.0,
        gaps in prop::collection::vec(0.0f64..2.0, 8..40),
    ) {
        let n = base.len().min(gaps.len());
        let lower: Vec<f64> = base[..n].to_vec();
        let upper: Vec<f64> = (0..n).map(|i| base[i] + gaps[i]).collect();
        let slo = ScenarioSamples::new(vec![(0, lower.clone()), (1, lower.clone())]).unwrap();
        let shi = ScenarioSamples::new(vec![(0, upper.clone()), (1, lower.clone())]).unwrap();
        let elo = sublinear_expectation(&slo).unwrap();
        let ehi = sublinear_expectation(&shi).unwrap();
        // Raising samples in one scenario can only raise the worst case.
        prop_assert!(ehi >= elo - 1e-12);
        let shifted: Vec<f64> = lower.iter().map(|v| v + shift).collect();
        let ssh = ScenarioSamples::new(vec![(0, shifted.clone()), (1, shifted)]).unwrap();
        let esh = sublinear_expectation(&ssh).unwrap();
        prop_assert!((esh - (elo + shift)).abs() <= 1e-9 * (1.0 + shift.abs()));
        // Doubling is a power-of-two rescale and commutes with rounding.
        let doubled: Vec<f64> = lower.iter().map(|v| 2.0 * v).collect();
        let sdb = ScenarioSamples::new(vec![(0, doubled.clone()), (1, doubled)]).unwrap();
        prop_assert_eq!(sublinear_expectation(&sdb).unwrap(), 2.0 * elo);
    }

    #[test]
    fn g_is_monotone_subadditive_and_two_homogeneous(
        a in -50.0f64..50.0,
        b in -50.0f64..50.0,
        lo in 0.5f64..2.0,
        width in 0.0f64..3.0,
    ) {
        let bounds = VolBounds::new(lo, lo + width).unwrap();
        if a <= b {
            prop_assert!(g_function(a, &bounds) <= g_function(b, &bounds));
        } else {
            prop_assert!(g_function(b, &bounds) <= g_function(a, &bounds));
        }
        let sub = g_function(a + b, &bounds)
            - g_function(a, &bounds)
            - g_function(b, &bounds);
        prop_assert!(sub <= 1e-12 * (1.0 + a.abs() + b.abs()));
        prop_assert_eq!(g_function(2.0 * a, &bounds), 2.0 * g_function(a, &bounds));
    }

    #[test]
    fn quadratic_variation_increments_stay_inside_the_interval(
        seed in 0u64..1000,
        n_random in 0usize..4,
        n_steps in 2usize..48,
    ) {
        let bounds = VolBounds::new(1.0, 4.0).unwrap();
        let grid = make_time_grid(0.0, 1.0, n_steps).unwrap();
        let family = scenario_family(&bounds, &grid, n_random, seed);
        for scen in &family {
            let path = build_g_path(scen, &grid, seed, 0).unwrap();
            prop_assert!(qv_increments_within(&path, &grid, &bounds));
        }
    }

    #[test]
    fn yosida_of_abs_is_bounded_by_the_slope(
        y in -30.0f64..30.0,
        lam in 1e-3f64..5.0,
        kappa in 0.1f64..4.0,
    ) {
        let p = ConvexPenalty::abs_scaled(kappa).unwrap();
        let u = p.yosida(lam, y).unwrap();
        prop_assert!(u.abs() <= kappa + 1e-12);
    }
}
