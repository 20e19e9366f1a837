mod common;

use maxmin_ee::algorithms::{maxmin_ee, maxmin_rate, power_min_baseline, Init, SolveOptions};
use maxmin_ee::scenario::{generate_drop, ScenarioSpec};
use proptest::prelude::*;

fn drop_spec(seed: u64, snr_db: f64) -> ScenarioSpec {
    ScenarioSpec {
        k: 2,
        m_tilde: 2,
        n_tilde: 1,
        snr_db,
        master_seed: seed,
        ..ScenarioSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn maxmin_ee_is_feasible_monotone_and_beats_the_rate_design(seed in 0u64..1000, snr in -10.0f64..20.0) {
        let d = generate_drop(&drop_spec(seed, snr), 0).unwrap();
        let opts = SolveOptions::default();
        let ee = maxmin_ee(&d.channels, &d.config, &opts).unwrap();
        prop_assert!(ee.converged());
        prop_assert!(ee.w.is_feasible(&d.config, 1e-9));
        let (tau, eta) = ee.trace.worst_decrease();
        prop_assert!(tau <= 1e-6 && eta <= 1e-6);
        let direct = common::direct_min_ee(ee.w.matrix(), &d.channels, &d.config);
        prop_assert!((direct - ee.min_ee).abs() <= 1e-12 * direct);
        prop_assert!((ee.min_ee - ee.objective).abs() * d.config.overhead() <= 1e-4 + 1e-12);

        let rate = maxmin_rate(&d.channels, &d.config, &opts).unwrap();
        prop_assert!(rate.converged());
        prop_assert!(ee.min_ee >= rate.min_ee - 1e-4);
        prop_assert!(rate.min_rate >= ee.min_rate - 1e-4);
    }

    #[test]
    fn power_minimization_meets_targets_with_less_power(seed in 0u64..1000, snr in -10.0f64..20.0) {
        let d = generate_drop(&drop_spec(seed, snr), 1).unwrap();
        let ee = maxmin_ee(&d.channels, &d.config, &SolveOptions::default()).unwrap();
        let pm = power_min_baseline(&ee.rates, &d.channels, &d.config).unwrap();
        prop_assert!(pm.converged());
        prop_assert!(pm.w.is_feasible(&d.config, 1e-9));
        prop_assert!(pm.objective <= ee.w.total_power() * (1.0 + 1e-6));
        for (got, want) in pm.rates.iter().zip(&ee.rates) {
            prop_assert!(*got >= want * (1.0 - 1e-5), "{got} < {want}");
        }
    }
}

#[test]
fn random_starts_reach_the_same_efficiency() {
    let d = generate_drop(&drop_spec(17, 10.0), 2).unwrap();
    let values: Vec<f64> = (0..5)
        .map(|s| {
            let opts = SolveOptions {
                init: Init::Random(s),
                ..SolveOptions::default()
            };
            maxmin_ee(&d.channels, &d.config, &opts).unwrap().min_ee
        })
        .collect();
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((hi - lo) / hi <= 1e-3, "{values:?}");
}

#[test]
fn second_baseline_tracks_the_rate_design() {
    for i in 0..5 {
        let d = generate_drop(&drop_spec(23, 15.0), i).unwrap();
        let rate = maxmin_rate(&d.channels, &d.config, &SolveOptions::default()).unwrap();
        let pm = power_min_baseline(&rate.rates, &d.channels, &d.config).unwrap();
        assert!((pm.min_ee - rate.min_ee).abs() <= 0.01 * rate.min_ee);
    }
}

#[test]
fn low_snr_designs_coincide() {
    let d = generate_drop(&drop_spec(5, -20.0), 0).unwrap();
    let opts = SolveOptions::default();
    let ee = maxmin_ee(&d.channels, &d.config, &opts).unwrap();
    let rate = maxmin_rate(&d.channels, &d.config, &opts).unwrap();
    // Both spend the full budget when the overhead dominates.
    assert!((ee.min_ee - rate.min_ee).abs() <= 0.01 * ee.min_ee);
}
