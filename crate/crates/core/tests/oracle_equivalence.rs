use hif_core::synthetic::{compare_with_oracle, random_scenario, JitterRng};
use hif_core::HifConfig;
use proptest::prelude::*;

fn config(alpha: f64, beta: f64, tol: f64, lhp: bool) -> HifConfig<f64> {
    HifConfig {
        alpha,
        beta,
        containment_tolerance: tol,
        lhp_enabled: lhp,
        compaction_epsilon: 0.0,
        ..HifConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interval_filter_matches_dense_grid(
        seed in any::<u64>(),
        alpha in 0.55f64..0.95,
        beta in 0.05f64..0.45,
        wide in any::<bool>(),
        lhp in any::<bool>(),
    ) {
        let cfg = config(alpha, beta, if wide { 0.1 } else { 0.0 }, lhp);
        let scenario = random_scenario(&mut JitterRng::new(seed), 6);
        let r = compare_with_oracle(&scenario, &cfg, 1e-9);
        prop_assert_eq!(r.mismatches, 0, "{:?} {:?}", scenario, r);
        prop_assert_eq!(r.invariant_violations, 0);
        prop_assert_eq!(r.coverage_violations, 0);
    }
}

#[test]
fn comparison_is_not_vacuous() {
    let cfg = config(0.7, 0.3, 0.0, true);
    let mut rng = JitterRng::new(11);
    let cells: usize = (0..20)
        .map(|_| compare_with_oracle(&random_scenario(&mut rng, 5), &cfg, 1e-9).compared_cells)
        .sum();
    assert!(cells > 20 * 1000, "{cells}");
}
