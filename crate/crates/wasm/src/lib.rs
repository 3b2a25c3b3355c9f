//! Browser bindings for the twinflow engine.
//!
//! Every export takes plain values or JSON text and returns JSON text shaped
//! either `{"ok": ...}` or `{"error": "..."}`, so the page never has to catch
//! exceptions and the same functions run unchanged in native tests.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value as Json};
use twinflow::ingest::{merge_channels, parse_csv_bytes, MergeSpec};
use twinflow::model::{evaluate, fit, predict, ModelKind, ModelSpec};
use twinflow::quality::{quality_check, QualitySpec};
use twinflow::sensors::{self, TriAxialAccel};
use twinflow::split::{split, SplitSpec};
use twinflow::synth::{self, ScenarioConfig, ScenarioKind};
use twinflow::timeseries::{resample, Rate, RawChannel, ResamplePolicy, Sample, TimeGrid, Timestamp, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(r: Result<Json, String>) -> String {
    match r {
        Ok(v) => json!({ "ok": v }),
        Err(e) => json!({ "error": e }),
    }
    .to_string()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Numbers or nulls; null is a missing reading.
fn values(json_array: &str) -> Result<Vec<Value>, String> {
    serde_json::from_str(json_array).map_err(|e| format!("expected a JSON array of numbers or nulls: {e}"))
}

fn channel(name: &str, rate: Rate, vals: &[Value]) -> Result<RawChannel, String> {
    let (num, den) = (rate.numer() as i64, rate.denom() as i64);
    let samples = vals
        .iter()
        .enumerate()
        .map(|(i, &value)| Sample { t: Timestamp(i as i64 * 1000 * den / num), value })
        .collect();
    RawChannel::new(name, "", rate, samples).map_err(err)
}

/// Resamples a regularly sampled channel (first sample at t = 0) onto a grid
/// of `grid_period_ms` covering the same span.
#[wasm_bindgen]
pub fn resample_channel(values_json: &str, rate: &str, grid_period_ms: u64, policy_json: &str) -> String {
    respond((|| {
        let rate: Rate = rate.parse().map_err(err)?;
        let vals = values(values_json)?;
        let policy: ResamplePolicy =
            if policy_json.trim().is_empty() { ResamplePolicy::default() } else { serde_json::from_str(policy_json).map_err(err)? };
        policy.validate().map_err(err)?;
        let ch = channel("signal", rate, &vals)?;
        let (_, last) = ch.span().ok_or("no samples")?;
        if grid_period_ms == 0 {
            return Err("grid period must be positive".into());
        }
        let count = (last.0 as u64 / grid_period_ms) as usize + 1;
        let grid = TimeGrid::new(Timestamp(0), grid_period_ms, count).map_err(err)?;
        let out = resample(&ch, &grid, &policy).map_err(err)?;
        Ok(json!({
            "direction": twinflow::timeseries::resample_direction(&ch, &grid),
            "input_t_ms": ch.timestamps().map(|t| t.0).collect::<Vec<_>>(),
            "grid_t_ms": grid.points().map(|t| t.0).collect::<Vec<_>>(),
            "values": out,
        }))
    })())
}

/// Overall dynamic body acceleration of three equally long axis traces.
#[wasm_bindgen]
pub fn odba_series(x_json: &str, y_json: &str, z_json: &str, rate: &str, static_window_ms: u64) -> String {
    respond((|| {
        let rate: Rate = rate.parse().map_err(err)?;
        let [x, y, z] = [("x", x_json), ("y", y_json), ("z", z_json)].map(|(n, j)| values(j).and_then(|v| channel(n, rate, &v)));
        let accel = TriAxialAccel::new(x?, y?, z?).map_err(err)?;
        let o = sensors::odba(&accel, static_window_ms).map_err(err)?;
        Ok(json!({
            "t_ms": o.timestamps().map(|t| t.0).collect::<Vec<_>>(),
            "odba": o.values().collect::<Vec<_>>(),
            "window_samples": rate.samples_in(static_window_ms),
        }))
    })())
}

fn param<T: for<'de> Deserialize<'de>>(files: &BTreeMap<String, Vec<u8>>, name: &str) -> Result<T, String> {
    let bytes = files.get(name).ok_or_else(|| format!("scenario has no {name}"))?;
    serde_json::from_slice(bytes).map_err(|e| format!("{name}: {e}"))
}

/// Generates a scenario in memory, runs merge, quality and split with its
/// shipped specs, then fits a linear model and a forest on the same split.
#[wasm_bindgen]
pub fn forest_vs_linear(kind: &str, seed: u64, n_trees: usize) -> String {
    respond((|| {
        let kind: ScenarioKind = serde_json::from_value(json!(kind)).map_err(|_| format!("unknown scenario `{kind}`"))?;
        if !(1..=500).contains(&n_trees) {
            return Err("n_trees must be between 1 and 500".into());
        }
        let files = synth::generate(&ScenarioConfig::new(kind, seed)).map_err(err)?;

        let merge: MergeSpec = param(&files, "merge_spec.json")?;
        let mut channels = Vec::new();
        let mut reports = Vec::new();
        for d in &merge.sources {
            let name = d.path.display().to_string();
            let bytes = files.get(&name).ok_or_else(|| format!("scenario has no {name}"))?;
            let (c, r) = parse_csv_bytes(bytes, d, &name).map_err(err)?;
            channels.extend(c);
            reports.push(r);
        }
        let (merged, _) = merge_channels(&merge, channels, reports).map_err(err)?;
        let quality: QualitySpec = param(&files, "quality_spec.json")?;
        let (clean, _) = quality_check(&merged, &quality).map_err(err)?;
        let split_spec: SplitSpec = param(&files, "split_spec.json")?;
        let (train, test, _) = split(&clean, &split_spec).map_err(err)?;

        let base: ModelSpec = param(&files, "model_spec.json")?;
        let actual = test.column(&base.target).ok_or("target missing from test set")?.to_vec();
        let mut results = serde_json::Map::new();
        for (label, kind) in [("linear", ModelKind::Linear), ("forest", ModelKind::RandomForest)] {
            let spec = ModelSpec { kind, n_trees, ..base.clone() };
            let model = fit(&train, &spec).map_err(err)?;
            let p = predict(&model, &test).map_err(err)?;
            let metrics = evaluate(&p.values, &actual).map_err(err)?;
            results.insert(label.into(), json!({ "metrics": metrics, "predicted": p.values }));
        }
        Ok(json!({
            "target": base.target,
            "features": base.features,
            "train_rows": train.rows(),
            "test_rows": test.rows(),
            "t_ms": test.timestamps().iter().map(|t| t.0).collect::<Vec<_>>(),
            "actual": actual,
            "models": results,
        }))
    })())
}

/// Engine version, for the page footer.
#[wasm_bindgen]
pub fn engine_version() -> String {
    twinflow::VERSION.to_string()
}
