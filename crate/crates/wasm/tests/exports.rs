use serde_json::Value;
use twinflow_wasm::{forest_vs_linear, odba_series, resample_channel};

fn ok(s: String) -> Value {
    let v: Value = serde_json::from_str(&s).unwrap();
    assert!(v.get("error").is_none(), "{s}");
    v["ok"].clone()
}

fn error(s: String) -> String {
    let v: Value = serde_json::from_str(&s).unwrap();
    v["error"].as_str().unwrap_or_else(|| panic!("expected an error: {s}")).to_string()
}

#[test]
fn resample_means_fast_samples_per_cell() {
    // 4 Hz onto 1 s cells: each cell averages four readings
    let vals: Vec<f64> = (0..8).map(f64::from).collect();
    let out = ok(resample_channel(&serde_json::to_string(&vals).unwrap(), "4", 1000, ""));
    assert_eq!(out["direction"], "downsampled");
    assert_eq!(out["grid_t_ms"], serde_json::json!([0, 1000]));
    assert_eq!(out["values"], serde_json::json!([1.5, 5.5]));
}

#[test]
fn resample_keeps_missing_readings_missing() {
    let out = ok(resample_channel("[1, null, 3]", "1", 500, r#"{"upsample":"hold_last"}"#));
    assert_eq!(out["direction"], "upsampled");
    assert_eq!(out["grid_t_ms"].as_array().unwrap().len(), 5);
}

#[test]
fn bad_inputs_come_back_as_errors() {
    assert!(error(resample_channel("[1,2]", "0", 1000, "")).contains("rate"));
    error(resample_channel("not json", "1", 1000, ""));
    error(resample_channel("[1,2]", "1", 1000, r#"{"bogus":1}"#));
    error(odba_series("[1,2]", "[1]", "[1,2]", "25", 2000));
    error(forest_vs_linear("cow", 1, 10));
    error(forest_vs_linear("pig", 1, 0));
}

#[test]
fn odba_of_a_constant_trace_is_zero() {
    let c = serde_json::to_string(&vec![9.81; 100]).unwrap();
    let out = ok(odba_series(&c, &c, &c, "25", 2000));
    assert_eq!(out["window_samples"], 50);
    assert!(out["odba"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn both_models_are_scored_on_the_same_test_rows() {
    let out = ok(forest_vs_linear("pig", 3, 30));
    let n = out["test_rows"].as_u64().unwrap() as usize;
    assert_eq!(out["actual"].as_array().unwrap().len(), n);
    let rmse = |m: &str| out["models"][m]["metrics"]["rmse"].as_f64().unwrap();
    assert!(rmse("forest").is_finite() && rmse("linear").is_finite());
    assert_eq!(out["models"]["forest"]["predicted"].as_array().unwrap().len(), n);
    // same inputs, same answer
    assert_eq!(forest_vs_linear("pig", 3, 30), forest_vs_linear("pig", 3, 30));
}
