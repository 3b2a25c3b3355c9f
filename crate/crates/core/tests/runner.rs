mod common;

use std::path::Path;

use common::scenario_dir;
use twinflow::runner::{
    load_manifest, run_pipeline, validate_manifest, PipelineManifest, RunError, RunOptions, RunRecord, Status, Step,
    RUN_RECORD_FILE,
};
use twinflow::synth::{ScenarioConfig, ScenarioKind, PIPELINE_FILE};

fn pig() -> (tempfile::TempDir, PipelineManifest) {
    let (dir, _) = scenario_dir(&ScenarioConfig::new(ScenarioKind::Pig, 7));
    let m = load_manifest(&dir.path().join(PIPELINE_FILE)).unwrap();
    (dir, m)
}

fn step(c: &str, params: Option<&str>, inputs: &[&str], outputs: &[&str]) -> Step {
    Step {
        component: c.into(),
        params: params.map(str::to_string),
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        skip: false,
    }
}

#[test]
fn canonical_five_step_chain_is_valid() {
    let (dir, _) = pig();
    let m = PipelineManifest {
        name: "five".into(),
        steps: vec![
            step("merge", Some("merge_spec.json"), &["wearable.csv", "chamber.csv"], &["m.csv", "m.json"]),
            step("quality", Some("quality_spec.json"), &["m.csv"], &["q.csv", "q.json"]),
            step("split", Some("split_spec.json"), &["q.csv"], &["train.csv", "test.csv"]),
            step("train", Some("model_spec.json"), &["train.csv"], &["model.json"]),
            step("report", None, &["metrics.json", "model.json", "pred.csv"], &["r.md", "r.json"]),
        ],
    };
    // report reads files the chain above never writes
    let v = validate_manifest(&m, dir.path());
    assert_eq!(v.violations.len(), 2, "{v:?}");
    std::fs::write(dir.path().join("metrics.json"), "{}").unwrap();
    std::fs::write(dir.path().join("pred.csv"), "").unwrap();
    assert!(validate_manifest(&m, dir.path()).is_valid());
}

#[test]
fn predict_only_chain_without_split_is_valid() {
    let (dir, m) = pig();
    run_pipeline(&m, dir.path(), &RunOptions::default()).unwrap();
    let reapply = load_manifest(&dir.path().join("out/reapply.json")).unwrap();
    let names: Vec<&str> = reapply.steps.iter().map(|s| s.component.as_str()).collect();
    assert_eq!(names, ["merge", "quality", "predict", "evaluate", "report"]);
    assert!(validate_manifest(&reapply, dir.path()).is_valid());
}

#[test]
fn record_covers_every_file() {
    let (dir, m) = pig();
    let rec = run_pipeline(&m, dir.path(), &RunOptions::default()).unwrap();
    assert_eq!(rec.status, Status::Completed);
    assert_eq!(rec.steps.len(), m.steps.len());
    for (s, r) in m.steps.iter().zip(&rec.steps) {
        assert_eq!(r.status, Status::Completed);
        assert_eq!(r.inputs.iter().map(|d| d.path.as_str()).collect::<Vec<_>>(), s.inputs);
        assert_eq!(r.outputs.iter().map(|d| d.path.as_str()).collect::<Vec<_>>(), s.outputs);
        assert_eq!(r.params.is_some(), s.params.is_some());
        assert!(r.start_marker < r.end_marker.unwrap());
    }
    // each consumed intermediate carries the digest its producer recorded
    let produced = rec.output_digests();
    for r in &rec.steps {
        for d in &r.inputs {
            if let Some(p) = produced.get(&d.path) {
                assert_eq!(p, &d.sha256);
            }
        }
    }
    let on_disk: RunRecord = serde_json::from_slice(&std::fs::read(dir.path().join(RUN_RECORD_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, rec);
}

#[test]
fn tampering_between_steps_is_caught_at_the_consumer() {
    let (dir, m) = pig();
    let hook = |index: usize, wd: &Path| {
        if index == 1 {
            let p = wd.join("out/merged.csv");
            let mut bytes = std::fs::read(&p).unwrap();
            bytes.extend_from_slice(b"\n");
            std::fs::write(p, bytes).unwrap();
        }
    };
    let opts = RunOptions { after_step: Some(&hook), ..Default::default() };
    let err = run_pipeline(&m, dir.path(), &opts).unwrap_err();
    let RunError::StepFailed { step, cause, record, .. } = err else { panic!("{err}") };
    assert_eq!(step, 2);
    assert!(cause.contains("digest mismatch") && cause.contains("out/merged.csv"), "{cause}");
    assert_eq!(record.status, Status::Failed);
    assert_eq!(record.steps.len(), 2);
    assert!(!dir.path().join("out/qc.csv").exists());
}

#[test]
fn failing_step_stops_the_run_and_leaves_no_outputs() {
    let (dir, mut m) = pig();
    std::fs::write(dir.path().join("model_spec.json"), r#"{"kind":"linear","target":"nope","features":["x"]}"#).unwrap();
    m.steps.truncate(4);
    let err = run_pipeline(&m, dir.path(), &RunOptions::default()).unwrap_err();
    let RunError::StepFailed { step, record, .. } = err else { panic!() };
    assert_eq!(step, 4);
    assert_eq!(record.steps[3].status, Status::Failed);
    assert!(record.steps[3].error.is_some());
    assert!(!dir.path().join("out/model.json").exists());
    let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with('.'))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn skipped_steps_are_recorded_but_not_run() {
    let (dir, mut m) = pig();
    m.steps.truncate(3);
    m.steps[2].skip = true;
    let rec = run_pipeline(&m, dir.path(), &RunOptions::default()).unwrap();
    assert_eq!(rec.steps[2].status, Status::Skipped);
    assert!(!dir.path().join("out/train.csv").exists());
}

#[test]
fn invalid_manifest_runs_nothing() {
    let (dir, _) = pig();
    let m = PipelineManifest { name: "bad".into(), steps: vec![step("train", None, &["absent.csv"], &["m.json"])] };
    let err = run_pipeline(&m, dir.path(), &RunOptions::default()).unwrap_err();
    let RunError::ValidationFailed(report) = err else { panic!() };
    assert_eq!(report.violations.len(), 2);
    assert!(!dir.path().join(RUN_RECORD_FILE).exists());
}
