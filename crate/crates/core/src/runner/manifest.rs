use std::collections::BTreeMap;
use std::path::{Component as PathPart, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::components::{load_params, Component};
use crate::ingest::MergeSpec;
use crate::model::ModelSpec;
use crate::quality::QualitySpec;
use crate::report::ReportSpec;
use crate::split::SplitSpec;
use crate::synth::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    /// One of the component ids; kept as a string so unknown ids surface as
    /// violations instead of parse errors.
    pub component: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<String>,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    pub name: String,
    pub steps: Vec<Step>,
}

impl PipelineManifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::components::to_json_bytes(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyManifest,
    UnknownComponent { step: usize, component: String },
    DanglingInput { step: usize, path: String },
    OutputCollision { step: usize, path: String },
    MissingParams { step: usize },
    UnexpectedParams { step: usize },
    InvalidParams { step: usize, path: String, message: String },
    Arity { step: usize, message: String },
    UndeclaredSource { step: usize, path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lexically resolves `p` against `base`, folding `.` and `..`.
pub(crate) fn resolve(base: &Path, p: &str) -> PathBuf {
    let mut out = PathBuf::new();
    for part in base.join(p).components() {
        match part {
            PathPart::CurDir => {}
            PathPart::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

fn check_params(c: Component, path: &Path) -> Result<Vec<PathBuf>, String> {
    let msg = |e: crate::components::ComponentError| e.to_string();
    match c {
        Component::Merge => {
            let s: MergeSpec = load_params(path).map_err(msg)?;
            Ok(s.source_paths(path.parent().unwrap_or(Path::new("."))))
        }
        Component::Quality => load_params::<QualitySpec>(path).map_err(msg)?.validate().map_err(|e| e.to_string()).map(|_| vec![]),
        Component::Split => load_params::<SplitSpec>(path).map_err(msg).map(|_| vec![]),
        Component::Train => load_params::<ModelSpec>(path).map_err(msg)?.validate().map_err(|e| e.to_string()).map(|_| vec![]),
        Component::Report => load_params::<ReportSpec>(path).map_err(msg).map(|_| vec![]),
        Component::Generate => load_params::<ScenarioConfig>(path).map_err(msg)?.validate().map_err(|e| e.to_string()).map(|_| vec![]),
        Component::Predict | Component::Evaluate => Ok(vec![]),
    }
}

/// Checks a manifest against the component contracts and returns every
/// violation found. Paths resolve against `workdir`.
pub fn validate_manifest(m: &PipelineManifest, workdir: &Path) -> ValidationReport {
    let mut v = Vec::new();
    if m.steps.is_empty() {
        v.push(Violation::EmptyManifest);
    }
    // path -> producing step
    let mut produced: BTreeMap<PathBuf, usize> = BTreeMap::new();
    for (i, s) in m.steps.iter().enumerate() {
        let step = i + 1;
        let Some(c) = Component::parse(&s.component) else {
            v.push(Violation::UnknownComponent { step, component: s.component.clone() });
            continue;
        };
        let ((imin, imax), (omin, omax)) = c.arity();
        let fits = |n: usize, min: usize, max: Option<usize>| n >= min && max.is_none_or(|x| n <= x);
        if !fits(s.inputs.len(), imin, imax) || !fits(s.outputs.len(), omin, omax) {
            v.push(Violation::Arity {
                step,
                message: format!("{c} got {} inputs and {} outputs", s.inputs.len(), s.outputs.len()),
            });
        }
        let available = |p: &PathBuf, produced: &BTreeMap<PathBuf, usize>| produced.contains_key(p) || p.exists();
        let mut sources = Vec::new();
        match (&s.params, c.needs_params(), c.accepts_params()) {
            (None, true, _) => v.push(Violation::MissingParams { step }),
            (Some(_), _, false) => v.push(Violation::UnexpectedParams { step }),
            (Some(p), _, true) => {
                let path = resolve(workdir, p);
                if produced.contains_key(&path) {
                    // written by an earlier step; checked when it runs
                } else if !path.exists() {
                    v.push(Violation::DanglingInput { step, path: p.clone() });
                } else {
                    match check_params(c, &path) {
                        Ok(src) => sources = src,
                        Err(message) => v.push(Violation::InvalidParams { step, path: p.clone(), message }),
                    }
                }
            }
            (None, false, _) => {}
        }
        let inputs: Vec<PathBuf> = s.inputs.iter().map(|p| resolve(workdir, p)).collect();
        if !s.skip {
            for (raw, p) in s.inputs.iter().zip(&inputs) {
                if !available(p, &produced) {
                    v.push(Violation::DanglingInput { step, path: raw.clone() });
                }
            }
        }
        for src in sources {
            let src = resolve(&src, "");
            if !inputs.contains(&src) {
                v.push(Violation::UndeclaredSource { step, path: src.display().to_string() });
            }
        }
        if s.skip {
            continue;
        }
        let mut mine = Vec::new();
        for raw in &s.outputs {
            let p = resolve(workdir, raw);
            if produced.contains_key(&p) || mine.contains(&p) || inputs.contains(&p) {
                v.push(Violation::OutputCollision { step, path: raw.clone() });
            }
            mine.push(p);
        }
        for p in mine {
            produced.insert(p, step);
        }
    }
    ValidationReport { violations: v }
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn resolve_folds_dots() {
        assert_eq!(resolve(Path::new("/w"), "./a/../b.csv"), PathBuf::from("/w/b.csv"));
        assert_eq!(resolve(Path::new("/w"), "/abs/x"), PathBuf::from("/abs/x"));
    }

    #[test]
    fn collects_all_violations() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("model.json"), r#"{"kind":"linear","target":"y","features":[]}"#).unwrap();
        let m = PipelineManifest {
            name: "bad".into(),
            steps: vec![
                step("fuse", None, &[], &["a.csv"]),
                step("evaluate", None, &["nowhere.csv"], &["m.json"]),
                step("train", Some("model.json"), &["m.json"], &["m.json"]),
                step("predict", Some("model.json"), &["x"], &["p.csv"]),
            ],
        };
        let r = validate_manifest(&m, dir.path());
        let kinds: Vec<String> =
            r.violations.iter().map(|v| serde_json::to_value(v).unwrap()["kind"].as_str().unwrap().to_string()).collect();
        assert_eq!(
            kinds,
            [
                "unknown_component",
                "dangling_input",
                "invalid_params",
                "output_collision",
                "arity",
                "unexpected_params",
                "dangling_input"
            ]
        );
    }

    #[test]
    fn skip_flag_and_json() {
        let m: PipelineManifest = serde_json::from_str(
            r#"{"name":"p","steps":[{"component":"evaluate","inputs":["p.csv"],"outputs":["m.json"],"skip":true}]}"#,
        )
        .unwrap();
        assert!(m.steps[0].skip);
        assert!(validate_manifest(&m, Path::new("/nonexistent")).is_valid());
        assert!(serde_json::from_str::<PipelineManifest>(r#"{"name":"p","steps":[],"extra":1}"#).is_err());
    }
}
