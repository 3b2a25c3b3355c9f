mod common;

use std::path::{Path, PathBuf};

use common::{run_scenario, scenario_dir};
use serde_json::{json, Value};
use twinflow::runner::{run_pipeline, RunOptions};
use twinflow::synth::{ScenarioConfig, ScenarioKind};

fn schema(name: &str) -> jsonschema::Validator {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"));
    let doc: Value = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
    jsonschema::validator_for(&doc).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn load(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value, what: &str) {
    let v = schema(schema_name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{what} against {schema_name}: {errors:#?}");
}

#[test]
fn every_written_document_matches_its_schema() {
    for kind in [ScenarioKind::Pig, ScenarioKind::Salmon, ScenarioKind::Mussel] {
        let (dir, _) = scenario_dir(&ScenarioConfig::new(kind, 2));
        run_scenario(dir.path(), None);
        let d = dir.path();
        for (file, name) in [
            ("merge_spec.json", "merge_spec"),
            ("quality_spec.json", "quality_spec"),
            ("split_spec.json", "split_spec"),
            ("model_spec.json", "model_spec"),
            ("report_spec.json", "report_spec"),
            ("pipeline.json", "pipeline_manifest"),
            ("ground_truth.json", "ground_truth"),
            ("run_record.json", "run_record"),
            ("out/model.json", "model_artifact"),
            ("out/report.json", "report"),
            ("out/reapply.json", "pipeline_manifest"),
        ] {
            assert_valid(name, &load(&d.join(file)), &format!("{kind} {file}"));
        }
    }
}

#[test]
fn linear_artifacts_and_failed_runs_match_too() {
    let (dir, _) = scenario_dir(&ScenarioConfig::new(ScenarioKind::Pig, 5));
    let d = dir.path();
    let mut spec = load(&d.join("model_spec.json"));
    spec["kind"] = json!("linear");
    std::fs::write(d.join("model_spec.json"), spec.to_string()).unwrap();
    run_scenario(d, None);
    assert_valid("model_artifact", &load(&d.join("out/model.json")), "linear model");

    std::fs::write(d.join("model_spec.json"), r#"{"kind":"linear","target":"nope","features":["x"]}"#).unwrap();
    let m = twinflow::runner::load_manifest(&d.join("pipeline.json")).unwrap();
    assert!(run_pipeline(&m, d, &RunOptions::default()).is_err());
    let rec = load(&d.join("run_record.json"));
    assert_eq!(rec["status"], "failed");
    assert_valid("run_record", &rec, "failed run record");
}

#[test]
fn schemas_reject_what_the_parsers_reject() {
    let bad = [
        ("merge_spec", json!({"sources": [], "bogus": 1})),
        ("merge_spec", json!({"sources": [{"path": "a.csv", "channel_name": "a", "timestamp_column": "t",
            "value_columns": ["v"], "timestamp_format": "epoch_ms", "nominal_rate_hz": "fast"}]})),
        ("quality_spec", json!({"outlier_method": {"iqr": {"factor": 0}}})),
        ("split_spec", json!({"mode": "chronological", "train_fraction": 1.0, "target_column": "y"})),
        ("model_spec", json!({"kind": "svm", "target": "y", "features": ["x"]})),
        ("pipeline_manifest", json!({"name": "x", "steps": [{"inputs": []}]})),
    ];
    for (name, doc) in bad {
        assert!(!schema(name).is_valid(&doc), "{name} accepted {doc}");
    }
    let rates = ["25", "0.5", ".5", "1/60", " 3 / 2 "];
    for r in rates {
        let doc = json!({"sources": [{"path": "a.csv", "channel_name": "a", "timestamp_column": "t",
            "value_columns": ["v"], "timestamp_format": "epoch_ms", "nominal_rate_hz": r}]});
        assert!(schema("merge_spec").is_valid(&doc), "{r}");
        assert!(serde_json::from_value::<twinflow::ingest::MergeSpec>(doc).is_ok(), "{r}");
    }
}
