use proptest::prelude::*;
use zoar_core::bench::{aggregate, read_trace_csv, write_trace_csv, Trace, TraceRow};
use zoar_core::estimators::{
    fd_estimate, reinforce_gs_estimate, zoar_from_probes, HistoryBuffer, QueryRecord,
};
use zoar_core::optimizers::TraceStatus;
use zoar_core::sampling::{materialize, norm2, DirectionSpec};
use zoar_core::{DistTag, EstimatorConfig, ObjectiveKind, ObjectiveSpec, Route};

fn tag() -> impl Strategy<Value = DistTag> {
    prop_oneof![Just(DistTag::Gaussian), Just(DistTag::Sphere), Just(DistTag::Coordinate)]
}

fn kind() -> impl Strategy<Value = ObjectiveKind> {
    prop_oneof![
        Just(ObjectiveKind::Ackley),
        Just(ObjectiveKind::Levy),
        Just(ObjectiveKind::Quadratic),
        Just(ObjectiveKind::Rosenbrock),
    ]
}

fn trace(gaps: Vec<f64>) -> Trace {
    Trace {
        fingerprint: String::new(),
        rows: gaps
            .into_iter()
            .enumerate()
            .map(|(i, g)| TraceRow {
                iter: i as u64,
                queries_cum: 10 * i as u64,
                f_clean: g,
                gap: g,
                wall_ms: 0.0,
            })
            .collect(),
        status: TraceStatus::Completed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fd_and_reinforce_agree_bitwise(
        kind in kind(),
        dim in 2usize..40,
        k in 1usize..12,
        mu in 0.01f64..1.0,
        sigma in prop_oneof![Just(0.0), Just(0.3)],
        seed in any::<u64>(),
        iteration in 1u64..10_000,
    ) {
        let obj = ObjectiveSpec::with_noise(kind, dim, sigma).unwrap();
        let theta: Vec<f64> = (0..dim).map(|i| ((i as f64) * 0.37).sin()).collect();
        let cfg = EstimatorConfig::new(mu, k, 1, DistTag::Gaussian);
        let a = fd_estimate(&obj, &theta, &cfg, iteration, seed).unwrap();
        let b = reinforce_gs_estimate(&obj, &theta, &cfg, iteration, seed).unwrap();
        prop_assert_eq!(a.gradient.as_slice(), b.gradient.as_slice());
    }

    #[test]
    fn directions_are_deterministic_and_normalized(tag in tag(), dim in 1usize..300, seed in any::<u64>()) {
        let spec = DirectionSpec::new(seed, tag, dim);
        let u = materialize(&spec).unwrap();
        let again = materialize(&spec).unwrap();
        prop_assert_eq!(u.as_slice(), again.as_slice());
        if tag != DistTag::Gaussian {
            prop_assert!((norm2(&u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn history_never_exceeds_capacity(k in 1usize..6, n in 1usize..6, pushes in 0usize..20) {
        let mut h = HistoryBuffer::new(k, n).unwrap();
        for p in 0..pushes {
            let block = (0..k).map(|j| QueryRecord {
                dir: DirectionSpec::new((p * k + j) as u64, DistTag::Gaussian, 2),
                value: p as f64,
                iteration: p as u64 + 1,
            });
            h.push_block(block).unwrap();
            prop_assert!(h.len() <= h.capacity());
            prop_assert_eq!(h.len(), k * (p + 1).min(n));
            // only the most recent blocks survive
            let oldest = h.records().next().unwrap().iteration;
            prop_assert_eq!(oldest, (p + 1).saturating_sub(n) as u64 + 1);
        }
    }

    #[test]
    fn averaged_baseline_ignores_constant_shift(
        values in prop::collection::vec(-10.0f64..10.0, 2..30),
        shift in -100.0f64..100.0,
        seed in any::<u64>(),
    ) {
        let dirs: Vec<Vec<f64>> = (0..values.len())
            .map(|i| materialize(&DirectionSpec::new(seed.wrapping_add(i as u64), DistTag::Gaussian, 4)).unwrap().into_inner())
            .collect();
        let probes: Vec<(&[f64], f64)> = dirs.iter().zip(&values).map(|(d, v)| (d.as_slice(), *v)).collect();
        let shifted: Vec<(&[f64], f64)> = dirs.iter().zip(&values).map(|(d, v)| (d.as_slice(), v + shift)).collect();
        let (a, _, _) = zoar_from_probes(Route::FiniteDifference, DistTag::Gaussian, 0.1, &probes).unwrap();
        let (b, _, _) = zoar_from_probes(Route::FiniteDifference, DistTag::Gaussian, 0.1, &shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()) * (1.0 + shift.abs()));
        }
    }

    #[test]
    fn aggregate_is_permutation_invariant(
        gaps in prop::collection::vec(prop::collection::vec(0.0f64..1e6, 5), 1..8),
        rotate in 0usize..8,
    ) {
        let traces: Vec<Trace> = gaps.iter().cloned().map(trace).collect();
        let mut rotated = traces.clone();
        let len = rotated.len();
        rotated.rotate_left(rotate % len);
        rotated.reverse();
        prop_assert_eq!(aggregate(&traces).unwrap(), aggregate(&rotated).unwrap());
    }

    #[test]
    fn trace_csv_round_trips(gaps in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 0..20)) {
        let gaps: Vec<f64> = gaps.into_iter().map(f64::abs).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = trace(gaps);
        write_trace_csv(&t, &path).unwrap();
        prop_assert_eq!(read_trace_csv(&path).unwrap().rows, t.rows);
    }
}
