use std::collections::BTreeMap;

use proptest::prelude::*;
use twinflow::ingest::{read_table_csv, write_table_csv};
use twinflow::model::{evaluate, fit, model_from_bytes, model_to_bytes, predict, ModelSpec, Payload, PredictionTable};
use twinflow::report::{generate_report, json_numbers, numeric_tokens, RunContext};
use twinflow::sensors::{odba, oxygen_uptake_rate, RespirometrySetup, TriAxialAccel};
use twinflow::split::{split, train_size, SplitMode, SplitSpec};
use twinflow::timeseries::{
    resample, window_aggregate, Aggregation, FeatureSpec, LabelAlignment, Rate, RawChannel, ResamplePolicy, TimeGrid,
    TimeIndex, TimeTable, Timestamp, Value,
};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

fn table(cols: Vec<(&str, Vec<f64>)>) -> TimeTable {
    let n = cols[0].1.len();
    TimeTable::new(
        TimeIndex::Regular(TimeGrid::new(Timestamp(0), 1000, n).unwrap()),
        cols.into_iter().map(|(k, v)| (k.to_string(), v.into_iter().map(Some).collect())).collect(),
    )
    .unwrap()
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn rate() -> impl Strategy<Value = (u64, u64)> {
    prop_oneof![(1u64..=50, Just(1u64)), (1u64..=3, prop::sample::select(vec![2u64, 4, 5, 60, 180]))]
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn resampling_onto_the_native_grid_is_identity(
        (num, den) in rate(),
        start in -5_000i64..5_000,
        values in prop::collection::vec(prop::option::weighted(0.9, -1e6f64..1e6), 2..80),
    ) {
        let r = Rate::new(num, den).unwrap();
        let samples: Vec<_> = values.iter().enumerate()
            .map(|(i, v)| twinflow::timeseries::Sample { t: Timestamp(start + i as i64 * r.period_ms() as i64), value: *v })
            .collect();
        let ch = RawChannel::new("c", "", r, samples).unwrap();
        let grid = TimeGrid::new(Timestamp(start), r.period_ms(), values.len()).unwrap();
        prop_assert_eq!(resample(&ch, &grid, &ResamplePolicy::default()).unwrap(), values);
    }

    #[test]
    fn constant_channel_stays_constant(
        c in -1e3f64..1e3,
        n in 10usize..200,
        period in prop::sample::select(vec![250u64, 1000, 3000, 10_000]),
        window_cells in 1u64..4,
    ) {
        let ch = RawChannel::regular("c", "", Rate::hz(4), Timestamp(0), &vec![c; n]);
        let grid = TimeGrid::new(Timestamp(period as i64 * window_cells as i64), period, 3).unwrap();
        for v in resample(&ch, &grid, &ResamplePolicy::default()).unwrap().into_iter().flatten() {
            prop_assert_eq!(v, c);
        }
        let spec = FeatureSpec {
            window_ms: period * window_cells,
            aggregations: [Aggregation::Mean, Aggregation::Min, Aggregation::Max].into(),
            label_alignment: LabelAlignment::WindowEnd,
        };
        for (_, col) in window_aggregate(&ch, &spec, &grid).unwrap() {
            for v in col.into_iter().flatten() {
                prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
        }
    }

    #[test]
    fn odba_ignores_constant_offsets(
        axes in prop::collection::vec(prop::collection::vec(-20.0f64..20.0, 60), 3),
        offsets in prop::collection::vec(-50.0f64..50.0, 3),
    ) {
        let build = |shift: &[f64]| {
            let ch = |k: usize, n: &str| {
                let v: Vec<f64> = axes[k].iter().map(|x| x + shift[k]).collect();
                RawChannel::regular(n, "", Rate::hz(25), Timestamp(0), &v)
            };
            TriAxialAccel::new(ch(0, "x"), ch(1, "y"), ch(2, "z")).unwrap()
        };
        let a: Vec<Value> = odba(&build(&[0.0; 3]), 1000).unwrap().values().collect();
        let b: Vec<Value> = odba(&build(&offsets), 1000).unwrap().values().collect();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.unwrap() - y.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn oxygen_uptake_is_linear_in_the_decline(
        slope_per_h in -20.0f64..20.0,
        level in 5.0f64..12.0,
        volume in 1.0f64..200.0,
        mass in 0.1f64..20.0,
    ) {
        let v: Vec<f64> = (0..400).map(|t| level + slope_per_h * t as f64 / 3600.0).collect();
        let ch = RawChannel::regular("do", "mg/L", Rate::hz(1), Timestamp(0), &v);
        let setup = RespirometrySetup { volume_liters: volume, mass_kg: mass };
        let want = -slope_per_h * volume / mass;
        for got in oxygen_uptake_rate(&ch, &setup, 40_000).unwrap().values() {
            prop_assert!((got.unwrap() - want).abs() <= 1e-7 * want.abs().max(1.0));
        }
    }

    #[test]
    fn split_partitions_rows(n in 1usize..300, frac in 0.05f64..0.95, seed in any::<u64>(), random in any::<bool>()) {
        let t = table(vec![("y", (0..n).map(|i| i as f64).collect())]);
        let mode = if random { SplitMode::Random { seed } } else { SplitMode::Chronological };
        let spec = SplitSpec { mode, train_fraction: frac, target_column: "y".into() };
        let Ok((train, test, info)) = split(&t, &spec) else { return Ok(()) };
        prop_assert_eq!(train.rows() + test.rows(), n);
        prop_assert_eq!(train.rows(), train_size(n, frac));
        prop_assert_eq!(info.train_rows, train.rows());
        let mut all: Vec<i64> = train.timestamps().iter().chain(test.timestamps().iter()).map(|t| t.0).collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), n);
        if !random && train.rows() > 0 && test.rows() > 0 {
            prop_assert!(train.timestamps().iter().max() < test.timestamps().iter().min());
        }
    }

    #[test]
    fn mae_never_exceeds_rmse(pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..60)) {
        let p: Vec<Value> = pairs.iter().map(|x| Some(x.0)).collect();
        let a: Vec<Value> = pairs.iter().map(|x| Some(x.1)).collect();
        let m = evaluate(&p, &a).unwrap();
        prop_assert!(m.mae <= m.rmse);
    }

    #[test]
    fn ols_residuals_are_orthogonal(
        rows in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0, -1e3f64..1e3), 8..60),
    ) {
        let (a, rest): (Vec<f64>, Vec<(f64, f64)>) = rows.iter().map(|r| (r.0, (r.1, r.2))).unzip();
        let (b, y): (Vec<f64>, Vec<f64>) = rest.into_iter().unzip();
        prop_assume!(std_dev(&a) > 1e-3 && std_dev(&b) > 1e-3);
        let t = table(vec![("a", a.clone()), ("b", b.clone()), ("y", y.clone())]);
        let model = fit(&t, &ModelSpec::linear("y", &["a", "b"])).unwrap();
        prop_assume!(!model.metadata.ridge_applied);
        let pred = predict(&model, &t).unwrap().values;
        let r: Vec<f64> = pred.iter().zip(&y).map(|(p, y)| y - p.unwrap()).collect();
        let n = y.len() as f64;
        let scale = 1e-6 * n * std_dev(&y).max(1e-12);
        prop_assert!(r.iter().sum::<f64>().abs() < scale);
        for col in [&a, &b] {
            let dot: f64 = r.iter().zip(col).map(|(r, x)| r * x).sum();
            prop_assert!(dot.abs() < scale * std_dev(col).max(1.0) * 100.0, "dot {}", dot);
        }
    }

    #[test]
    fn noiseless_linear_fit_recovers_coefficients(
        intercept in -50.0f64..50.0,
        c in prop::collection::vec(-10.0f64..10.0, 3),
        xs in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 12..40),
    ) {
        let col = |k: usize| xs.iter().map(|r| r[k]).collect::<Vec<f64>>();
        let y: Vec<f64> = xs.iter().map(|r| intercept + r.iter().zip(&c).map(|(x, c)| x * c).sum::<f64>()).collect();
        let t = table(vec![("x0", col(0)), ("x1", col(1)), ("x2", col(2)), ("y", y)]);
        let model = fit(&t, &ModelSpec::linear("y", &["x0", "x1", "x2"])).unwrap();
        prop_assume!(!model.metadata.ridge_applied);
        let Payload::Linear(m) = &model.payload else { unreachable!() };
        let rel = |est: f64, truth: f64| (est - truth).abs() / truth.abs().max(1.0);
        prop_assert!(rel(m.intercept, intercept) < 1e-6);
        for (est, truth) in m.coefficients.iter().zip(&c) {
            prop_assert!(rel(*est, *truth) < 1e-6, "{} vs {}", est, truth);
        }
    }

    #[test]
    fn forest_predictions_stay_within_training_targets(
        rows in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -100.0f64..100.0), 12..50),
        probe in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..20),
        seed in any::<u64>(),
    ) {
        let t = table(vec![
            ("a", rows.iter().map(|r| r.0).collect()),
            ("b", rows.iter().map(|r| r.1).collect()),
            ("y", rows.iter().map(|r| r.2).collect()),
        ]);
        let mut spec = ModelSpec::forest("y", &["a", "b"], seed);
        spec.n_trees = 10;
        spec.min_samples_leaf = 2;
        let model = fit(&t, &spec).unwrap();
        let lo = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
        let q = table(vec![("a", probe.iter().map(|p| p.0).collect()), ("b", probe.iter().map(|p| p.1).collect())]);
        for p in predict(&model, &q).unwrap().values {
            let p = p.unwrap();
            prop_assert!(p >= lo && p <= hi, "{} outside [{}, {}]", p, lo, hi);
        }
    }

    #[test]
    fn artifacts_round_trip_bit_exactly(
        rows in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 12..40),
        forest in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let t = table(vec![("a", rows.iter().map(|r| r.0).collect()), ("y", rows.iter().map(|r| r.1).collect())]);
        let mut spec = if forest { ModelSpec::forest("y", &["a"], seed) } else { ModelSpec::linear("y", &["a"]) };
        spec.n_trees = 5;
        let model = fit(&t, &spec).unwrap();
        let back = model_from_bytes(&model_to_bytes(&model)).unwrap();
        prop_assert_eq!(&back, &model);
        let (p, q) = (predict(&model, &t).unwrap().values, predict(&back, &t).unwrap().values);
        prop_assert!(p.iter().zip(&q).all(|(a, b)| a.unwrap().to_bits() == b.unwrap().to_bits()));
    }

    #[test]
    fn table_csv_round_trips(cols in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, any::<f64>().prop_filter("finite", |x| x.is_finite())), 5), 1..4)) {
        let names = ["a", "b", "c"];
        let t = TimeTable::new(
            TimeIndex::Regular(TimeGrid::new(Timestamp(-2000), 500, 5).unwrap()),
            cols.iter().enumerate().map(|(i, c)| (names[i].to_string(), c.clone())).collect(),
        ).unwrap();
        let back = read_table_csv(&write_table_csv(&t), "mem").unwrap();
        prop_assert_eq!(back.names(), t.names());
        prop_assert_eq!(back.timestamps(), t.timestamps());
        for (name, col) in t.columns() {
            let got = back.column(name).unwrap();
            prop_assert!(col.iter().zip(got).all(|(a, b)| a.map(f64::to_bits) == b.map(f64::to_bits)));
        }
    }

    #[test]
    fn markdown_numbers_all_appear_in_json(
        rows in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 12..30),
    ) {
        let t = table(vec![("a", rows.iter().map(|r| r.0).collect()), ("y", rows.iter().map(|r| r.1).collect())]);
        let model = fit(&t, &ModelSpec::linear("y", &["a"])).unwrap();
        let p = predict(&model, &t).unwrap();
        let pt = PredictionTable::new(&model, &t, p);
        let m = evaluate(&pt.predicted, &pt.actual).unwrap();
        let r = generate_report(&m, &model, &pt, &RunContext::default()).unwrap();
        let json: serde_json::Value = serde_json::from_slice(&r.to_json()).unwrap();
        let mut known = BTreeMap::new();
        json_numbers(&json, &mut known);
        for tok in numeric_tokens(&r.to_markdown()) {
            prop_assert!(known.contains_key(&tok), "{} not in json", tok);
        }
    }
}

#[test]
fn more_trees_do_not_hurt_on_planted_scenarios() {
    use twinflow::synth::{feature_names, generate_scenario, target_name, ScenarioConfig, ScenarioKind};
    let mut wins = 0;
    for seed in 1..=5u64 {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_scenario(&ScenarioConfig::new(ScenarioKind::Pig, seed).with_duration(12 * 3600)).unwrap();
        twinflow::synth::write_files(&s.files, dir.path()).unwrap();
        let mut m = twinflow::runner::load_manifest(&dir.path().join("pipeline.json")).unwrap();
        m.steps.truncate(3);
        twinflow::runner::run_pipeline(&m, dir.path(), &Default::default()).unwrap();
        let train = twinflow::ingest::read_table(&dir.path().join("out/train.csv")).unwrap();
        let test = twinflow::ingest::read_table(&dir.path().join("out/test.csv")).unwrap();
        let target = target_name(ScenarioKind::Pig);
        let actual = test.column(target).unwrap().to_vec();
        let rmse = |trees: usize| {
            let mut spec = ModelSpec::forest(target, &feature_names(ScenarioKind::Pig), seed);
            spec.n_trees = trees;
            let model = fit(&train, &spec).unwrap();
            evaluate(&predict(&model, &test).unwrap().values, &actual).unwrap().rmse
        };
        wins += (rmse(100) <= rmse(1)) as usize;
    }
    assert!(wins >= 3, "100 trees beat 1 tree on only {wins}/5 seeds");
}
