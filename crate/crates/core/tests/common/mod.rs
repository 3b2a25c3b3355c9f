#![allow(dead_code)]

use std::path::Path;

use tempfile::TempDir;
use twinflow::runner::{load_manifest, run_pipeline, RunOptions, RunRecord};
use twinflow::synth::{generate_scenario, write_files, Scenario, ScenarioConfig, PIPELINE_FILE};

/// Writes a generated scenario into a fresh directory.
pub fn scenario_dir(cfg: &ScenarioConfig) -> (TempDir, Scenario) {
    let dir = tempfile::tempdir().unwrap();
    let s = generate_scenario(cfg).unwrap();
    write_files(&s.files, dir.path()).unwrap();
    (dir, s)
}

/// Runs the scenario's own pipeline, optionally truncated to its first `steps` steps.
pub fn run_scenario(dir: &Path, steps: Option<usize>) -> RunRecord {
    let mut m = load_manifest(&dir.join(PIPELINE_FILE)).unwrap();
    if let Some(n) = steps {
        m.steps.truncate(n);
    }
    run_pipeline(&m, dir, &RunOptions::default()).unwrap()
}

pub fn present(v: &[Option<f64>]) -> Vec<f64> {
    v.iter().flatten().copied().collect()
}
