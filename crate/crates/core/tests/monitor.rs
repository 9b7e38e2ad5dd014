use std::collections::BTreeMap;

use govtrace::evidence::{DecisionEvent, EvidenceTier, LogicType};
use govtrace::monitor::{bin_frequencies, detect, fit_baseline, psi, AlarmKind, MonitorConfig, MonitorError};
use govtrace::{BaselineF32, MonitorConfigF32};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn events(rows: &[(f64, f64)], overrides: &[bool]) -> Vec<DecisionEvent> {
    rows.iter()
        .zip(overrides.iter().chain(std::iter::repeat(&false)))
        .enumerate()
        .map(|(i, ((a, b), o))| {
            let mut e = DecisionEvent::new(format!("{i:032x}"), EvidenceTier::Lightweight, LogicType::MlInference, "ok");
            e.context.feature_vector = BTreeMap::from([("a".to_owned(), *a), ("b".to_owned(), *b)]);
            e.override_record.override_occurred = Some(*o);
            e.temporal.event_timestamp = Some(i as i64 * 1_000);
            e
        })
        .collect()
}

fn gaussian_rows(n: usize, rng: &mut ChaCha8Rng, rho: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let e: f64 = StandardNormal.sample(rng);
            (z, rho * z + (1.0 - rho * rho).sqrt() * e)
        })
        .collect()
}

fn small_config() -> MonitorConfig {
    MonitorConfig {
        min_window: 200,
        ..MonitorConfig::default()
    }
}

#[test]
fn windows_below_minimum_are_rejected() {
    let rows = gaussian_rows(999, &mut ChaCha8Rng::seed_from_u64(1), 0.0);
    let err = fit_baseline(&events(&rows, &[]), &MonitorConfig::<f64>::default()).unwrap_err();
    assert_eq!(err, MonitorError::WindowTooSmall { got: 999, need: 1000 });
}

#[test]
fn same_distribution_stays_quiet() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let config = MonitorConfig::<f64>::default();
    let base = fit_baseline(&events(&gaussian_rows(5000, &mut rng, 0.5), &[]), &config).unwrap();
    let report = detect(&events(&gaussian_rows(5000, &mut rng, 0.5), &[]), &base, &config).unwrap();
    assert!(!report.fired(), "{:?}", report.alarms);
    for freq in base.per_feature.values().map(|c| &c.bin_frequencies) {
        assert!(freq.iter().all(|f| (f - 0.1).abs() < 1e-9));
    }
}

#[test]
fn location_shift_raises_psi_alarm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = MonitorConfig::<f64>::default();
    let base = fit_baseline(&events(&gaussian_rows(4000, &mut rng, 0.0), &[]), &config).unwrap();
    let shifted: Vec<(f64, f64)> = gaussian_rows(4000, &mut rng, 0.0).into_iter().map(|(a, b)| (a + 1.0, b)).collect();
    let report = detect(&events(&shifted, &[]), &base, &config).unwrap();
    assert!(report.has(AlarmKind::PsiShift, "a"));
    assert!(!report.has(AlarmKind::PsiShift, "b"));
}

#[test]
fn constant_column_collapses_variance_and_zeros_inflate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let config = MonitorConfig::<f64>::default();
    let base = fit_baseline(&events(&gaussian_rows(3000, &mut rng, 0.0), &[]), &config).unwrap();
    let rows: Vec<(f64, f64)> = gaussian_rows(3000, &mut rng, 0.0).into_iter().map(|(_, b)| (0.0, b)).collect();
    let report = detect(&events(&rows, &[]), &base, &config).unwrap();
    assert!(report.has(AlarmKind::VarianceCollapse, "a"));
    assert!(report.has(AlarmKind::ZeroInflation, "a"));
    assert_eq!(report.variance_ratios["a"], Some(0.0));
}

#[test]
fn override_rate_change_is_significant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = MonitorConfig::<f64>::default();
    let rows = gaussian_rows(2000, &mut rng, 0.0);
    let low: Vec<bool> = (0..2000).map(|i| i % 20 == 0).collect();
    let high: Vec<bool> = (0..2000).map(|i| i % 5 == 0).collect();
    let base = fit_baseline(&events(&rows, &low), &config).unwrap();
    let report = detect(&events(&rows, &high), &base, &config).unwrap();
    assert!(report.override_rate_drift.significant);
    assert!(report.alarms.iter().any(|a| a.kind == AlarmKind::OverrideDrift));
    let same = detect(&events(&rows, &low), &base, &config).unwrap();
    assert!(!same.override_rate_drift.significant);
    assert_eq!(same.override_rate_drift.p_value, 1.0);
}

#[test]
fn decorrelation_is_visible_only_to_the_joint_detector() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base_rows = gaussian_rows(4000, &mut rng, 0.9);
    let mut window = gaussian_rows(4000, &mut rng, 0.9);
    let mut bs: Vec<f64> = window.iter().map(|r| r.1).collect();
    bs.shuffle(&mut rng);
    window.iter_mut().zip(bs).for_each(|(r, b)| r.1 = b);

    let univariate = MonitorConfig::<f64>::default();
    let base = fit_baseline(&events(&base_rows, &[]), &univariate).unwrap();
    let report = detect(&events(&window, &[]), &base, &univariate).unwrap();
    assert_eq!(report.univariate_alarms().count(), 0);
    assert_eq!(report.correlation_drift, None);

    let joint = MonitorConfig {
        joint_detector: true,
        ..univariate
    };
    let report = detect(&events(&window, &[]), &base, &joint).unwrap();
    // Off-diagonal 0.9 -> ~0 on both sides: norm near 0.9 * sqrt(2).
    let drift = report.correlation_drift.unwrap();
    assert!(drift > 1.1 && drift < 1.4, "{drift}");
    assert!(report.alarms.iter().any(|a| a.kind == AlarmKind::CorrelationDrift));
}

#[test]
fn single_precision_monitor_matches_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base_events = events(&gaussian_rows(3000, &mut rng, 0.3), &[]);
    let shifted: Vec<(f64, f64)> = gaussian_rows(3000, &mut rng, 0.3).into_iter().map(|(a, b)| (a * 2.0, b)).collect();
    let window = events(&shifted, &[]);

    let c32 = MonitorConfigF32::default();
    let b32: BaselineF32 = fit_baseline(&base_events, &c32).unwrap();
    let r32 = detect(&window, &b32, &c32).unwrap();
    let c64 = MonitorConfig::<f64>::default();
    let r64 = detect(&window, &fit_baseline(&base_events, &c64).unwrap(), &c64).unwrap();
    assert!((r32.per_feature_psi["a"] as f64 - r64.per_feature_psi["a"]).abs() < 1e-3);
    assert_eq!(
        r32.alarms.iter().map(|a| a.kind).collect::<Vec<_>>(),
        r64.alarms.iter().map(|a| a.kind).collect::<Vec<_>>()
    );
}

#[test]
fn baseline_serializes_round_trip() {
    let rows = gaussian_rows(1000, &mut ChaCha8Rng::seed_from_u64(8), 0.0);
    let base = fit_baseline(&events(&rows, &[]), &MonitorConfig::<f64>::default()).unwrap();
    let text = serde_json::to_string(&base).unwrap();
    assert_eq!(serde_json::from_str::<govtrace::monitor::Baseline>(&text).unwrap(), base);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn marginal_statistics_ignore_order(seed in any::<u64>(), shift in -0.5f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = small_config();
        let base = fit_baseline(&events(&gaussian_rows(300, &mut rng, 0.4), &[]), &config).unwrap();
        let rows: Vec<(f64, f64)> = gaussian_rows(300, &mut rng, 0.4).into_iter().map(|(a, b)| (a + shift, b)).collect();
        let mut permuted = rows.clone();
        let mut bs: Vec<f64> = permuted.iter().map(|r| r.1).collect();
        permuted.shuffle(&mut rng);
        bs.shuffle(&mut rng);
        permuted.iter_mut().zip(bs).for_each(|(r, b)| r.1 = b);

        let r1 = detect(&events(&rows, &[]), &base, &config).unwrap();
        let r2 = detect(&events(&permuted, &[]), &base, &config).unwrap();
        prop_assert_eq!(&r1.per_feature_psi, &r2.per_feature_psi);
        prop_assert_eq!(&r1.variance_ratios, &r2.variance_ratios);
        prop_assert_eq!(&r1.zero_inflation_deltas, &r2.zero_inflation_deltas);
        prop_assert_eq!(r1.univariate_alarms().count(), r2.univariate_alarms().count());
    }

    #[test]
    fn psi_grows_as_mass_moves(
        weights in prop::collection::vec(1u32..100, 2..12),
        from in any::<prop::sample::Index>(),
        to in any::<prop::sample::Index>(),
        steps in prop::collection::vec(0.0f64..1.0, 2..8),
    ) {
        let total: u32 = weights.iter().sum();
        let expected: Vec<f64> = weights.iter().map(|w| *w as f64 / total as f64).collect();
        let (i, j) = (from.index(expected.len()), to.index(expected.len()));
        prop_assume!(i != j);
        let mass = expected[i] / 2.0;
        let mut ts = steps;
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut last = psi(&expected, &expected, 1e-6);
        prop_assert_eq!(last, 0.0);
        for t in ts {
            let mut actual = expected.clone();
            actual[i] -= t * mass;
            actual[j] += t * mass;
            let value = psi(&expected, &actual, 1e-6);
            prop_assert!(value >= last - 1e-15, "{} < {}", value, last);
            last = value;
        }
    }

    #[test]
    fn bin_frequencies_sum_to_one(values in prop::collection::vec(-1e3f64..1e3, 1..200), edges in prop::collection::vec(-1e3f64..1e3, 1..12)) {
        let mut edges = edges;
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let freq = bin_frequencies(&edges, &values);
        prop_assert!((freq.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn psi_on_disjoint_support_is_large_but_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base_rows: Vec<(f64, f64)> = (0..1000).map(|_| (rng.random_range(0.0..1.0), 0.0)).collect();
    let config = MonitorConfig::<f64>::default();
    let base = fit_baseline(&events(&base_rows, &[]), &config).unwrap();
    let far: Vec<(f64, f64)> = (0..1000).map(|_| (rng.random_range(5.0..6.0), 0.0)).collect();
    let value = detect(&events(&far, &[]), &base, &config).unwrap().per_feature_psi["a"];
    assert!(value.is_finite() && value > 5.0, "{value}");
}
