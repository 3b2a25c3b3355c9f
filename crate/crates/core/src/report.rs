//! Report generation. The JSON document is built first and the markdown is
//! rendered from it, so every number shown in the markdown is in the JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::model::{Metrics, ModelArtifact, ModelKind, PredictionTable};
use crate::runner::PipelineManifest;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Recorded next to the metrics table.
pub const METRIC_NAMING_NOTE: &str = "Accuracy and precision are classification terms; for these regression \
models they are reported as rmse and mae (error size, in target units) and r2 (share of target variance explained).";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("metrics cover no rows")]
    EmptyMetrics,
    #[error("{0}")]
    Inconsistent(String),
}

/// Paths the reapplication manifest should point at, relative to the
/// directory the manifest is run from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReapplySpec {
    pub merge_params: String,
    pub quality_params: String,
    pub sources: Vec<String>,
    pub model: String,
    #[serde(default = "default_reapply_dir")]
    pub out_dir: String,
}

fn default_reapply_dir() -> String {
    "reapply".into()
}

fn default_title() -> String {
    "Model report".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    #[serde(default = "default_title")]
    pub title: String,
    /// Injected timestamp; the wall clock is never read.
    #[serde(default)]
    pub generated_at: Option<String>,
    #[serde(default)]
    pub reapply: Option<ReapplySpec>,
}

impl Default for ReportSpec {
    fn default() -> Self {
        ReportSpec { title: default_title(), generated_at: None, reapply: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

/// What the report knows about the run that produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunContext {
    pub spec: ReportSpec,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub target: String,
    pub features: Vec<String>,
    pub parameters: Json,
    pub content_hash: String,
    pub n_train: usize,
    pub n_excluded_incomplete: usize,
    pub train_start_ms: i64,
    pub train_end_ms: i64,
    pub ridge_applied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGuideline {
    pub feature: String,
    pub min: f64,
    pub max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guidelines {
    pub note: String,
    pub feature_ranges: Vec<FeatureGuideline>,
    pub target_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reapplication {
    pub command: String,
    pub manifest: PipelineManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub train_rows: usize,
    pub evaluated_rows: usize,
    pub prediction_rows: usize,
    pub usable_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub metrics: Metrics,
    pub metric_naming_note: String,
    pub model: ModelSection,
    pub sizes: Sizes,
    pub guidelines: Guidelines,
    pub inputs: Vec<InputDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reapplication: Option<Reapplication>,
    pub predictions: PredictionTable,
}

/// Predict-only chain: merge, quality, predict with the saved model, evaluate, report.
pub fn reapply_manifest(r: &ReapplySpec) -> PipelineManifest {
    use crate::runner::Step;
    let out = |name: &str| format!("{}/{}", r.out_dir.trim_end_matches('/'), name);
    let step = |component: &str, params: Option<&str>, inputs: Vec<String>, outputs: Vec<String>| Step {
        component: component.into(),
        params: params.map(str::to_string),
        inputs,
        outputs,
        skip: false,
    };
    PipelineManifest {
        name: "reapply".into(),
        steps: vec![
            step("merge", Some(&r.merge_params), r.sources.clone(), vec![out("merged.csv"), out("merge_report.json")]),
            step("quality", Some(&r.quality_params), vec![out("merged.csv")], vec![out("qc.csv"), out("quality_report.json")]),
            step("predict", None, vec![r.model.clone(), out("qc.csv")], vec![out("predictions.csv")]),
            step("evaluate", None, vec![out("predictions.csv")], vec![out("metrics.json")]),
            step(
                "report",
                None,
                vec![out("metrics.json"), r.model.clone(), out("predictions.csv")],
                vec![out("report.md"), out("report.json")],
            ),
        ],
    }
}

pub fn generate_report(
    metrics: &Metrics,
    model: &ModelArtifact,
    predictions: &PredictionTable,
    ctx: &RunContext,
) -> Result<Report, ReportError> {
    if metrics.n == 0 {
        return Err(ReportError::EmptyMetrics);
    }
    let meta = &model.metadata;
    let feature_ranges = model
        .spec
        .features
        .iter()
        .map(|f| {
            let [min, max] = meta.feature_ranges.get(f).copied().ok_or_else(|| {
                ReportError::Inconsistent(format!("model metadata lacks the range of `{f}`"))
            })?;
            Ok(FeatureGuideline { feature: f.clone(), min, max, unit: meta.feature_units.get(f).cloned() })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    let reapplication = ctx.spec.reapply.as_ref().map(|r| Reapplication {
        command: "twinflow run reapply.json --workdir <dir>".into(),
        manifest: reapply_manifest(r),
    });
    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        title: ctx.spec.title.clone(),
        generated_at: ctx.spec.generated_at.clone(),
        metrics: metrics.clone(),
        metric_naming_note: METRIC_NAMING_NOTE.into(),
        model: ModelSection {
            kind: model.spec.kind,
            target: model.spec.target.clone(),
            features: model.spec.features.clone(),
            parameters: serde_json::to_value(&model.spec).expect("spec serializes"),
            content_hash: model.content_hash.clone(),
            n_train: meta.n_train,
            n_excluded_incomplete: meta.n_excluded_incomplete,
            train_start_ms: meta.train_start_ms,
            train_end_ms: meta.train_end_ms,
            ridge_applied: meta.ridge_applied,
        },
        sizes: Sizes {
            train_rows: meta.n_train,
            evaluated_rows: metrics.n,
            prediction_rows: predictions.len(),
            usable_predictions: predictions.usable.iter().filter(|&&u| u).count(),
        },
        guidelines: Guidelines {
            note: "The model was fitted on the feature ranges below. Inputs outside them are extrapolation: \
                   linear predictions continue the fitted trend, forest predictions stay within the training target range."
                .into(),
            feature_ranges,
            target_range: meta.target_range,
        },
        inputs: ctx.inputs.clone(),
        reapplication,
        predictions: predictions.clone(),
    })
}

/// A number exactly as it is written in the JSON document.
fn num(v: &Json) -> String {
    match v {
        Json::Null => "n/a".into(),
        other => other.to_string(),
    }
}

fn param_cell(v: &Json) -> String {
    match v {
        Json::String(s) => s.clone(),
        Json::Array(items) => items.iter().map(param_cell).collect::<Vec<_>>().join(", "),
        other => num(other),
    }
}

impl Report {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn to_markdown(&self) -> String {
        let j = serde_json::to_value(self).expect("report serializes");
        let mut md = String::new();
        let w = &mut md;
        let _ = writeln!(w, "# {}\n", self.title);
        if let Some(at) = &self.generated_at {
            let _ = writeln!(w, "Generated at {at}.\n");
        }

        let _ = writeln!(w, "## Metrics\n");
        let _ = writeln!(w, "| metric | value |\n|---|---|");
        for k in ["rmse", "mae", "r2", "n"] {
            let _ = writeln!(w, "| {k} | {} |", num(&j["metrics"][k]));
        }
        if let Some(note) = &self.metrics.note {
            let _ = writeln!(w, "\n{note}");
        }
        let _ = writeln!(w, "\n{}\n", self.metric_naming_note);

        let m = &j["model"];
        let _ = writeln!(w, "## Model\n");
        let _ = writeln!(w, "- kind: {}", param_cell(&m["kind"]));
        let _ = writeln!(w, "- target: {}", self.model.target);
        let _ = writeln!(w, "- features: {}", self.model.features.join(", "));
        let _ = writeln!(w, "- content hash: `{}`", self.model.content_hash);
        let _ = writeln!(w, "- ridge applied: {}\n", self.model.ridge_applied);
        let _ = writeln!(w, "| parameter | value |\n|---|---|");
        if let Json::Object(params) = &m["parameters"] {
            for (k, v) in params {
                let _ = writeln!(w, "| {k} | {} |", param_cell(v));
            }
        }

        let s = &j["sizes"];
        let _ = writeln!(w, "\n## Data\n");
        let _ = writeln!(w, "- training rows: {}", num(&s["train_rows"]));
        let _ = writeln!(w, "- rows excluded from training as incomplete: {}", num(&m["n_excluded_incomplete"]));
        let _ = writeln!(w, "- training time range: {} ms to {} ms", num(&m["train_start_ms"]), num(&m["train_end_ms"]));
        let _ = writeln!(w, "- evaluated rows: {}", num(&s["evaluated_rows"]));
        let _ = writeln!(
            w,
            "- prediction rows: {} ({} usable)",
            num(&s["prediction_rows"]),
            num(&s["usable_predictions"])
        );
        let _ = writeln!(w, "\nThe prediction-versus-actual series is in `predictions` of the JSON report.\n");

        let g = &j["guidelines"];
        let _ = writeln!(w, "## Guidelines for reuse\n\n{}\n", self.guidelines.note);
        let _ = writeln!(w, "| feature | min | max | unit |\n|---|---|---|---|");
        if let Json::Array(rows) = &g["feature_ranges"] {
            for r in rows {
                let unit = r["unit"].as_str().unwrap_or("");
                let _ = writeln!(w, "| {} | {} | {} | {unit} |", param_cell(&r["feature"]), num(&r["min"]), num(&r["max"]));
            }
        }
        let _ = writeln!(
            w,
            "\nTraining target range: {} to {}.\n",
            num(&g["target_range"][0]),
            num(&g["target_range"][1])
        );

        if let Some(r) = &self.reapplication {
            let _ = writeln!(w, "## Reapplication\n");
            let _ = writeln!(w, "Save the manifest below as `reapply.json` and run `{}`.\n", r.command);
            let manifest = serde_json::to_string_pretty(&r.manifest).expect("manifest serializes");
            let _ = writeln!(w, "```json\n{manifest}\n```\n");
        }

        let _ = writeln!(w, "## Inputs\n");
        let _ = writeln!(w, "| file | sha256 |\n|---|---|");
        for i in &self.inputs {
            let _ = writeln!(w, "| {} | `{}` |", i.name, i.sha256);
        }
        md
    }
}

/// Every numeric token in `markdown`, in order; used to check that the
/// markdown shows nothing the JSON does not hold.
pub fn numeric_tokens(markdown: &str) -> Vec<String> {
    let cs: Vec<char> = markdown.chars().collect();
    let word = |c: char| c.is_alphanumeric() || c == '_';
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let sign = cs[i] == '-' && cs.get(i + 1).is_some_and(char::is_ascii_digit);
        let boundary = i == 0 || !word(cs[i - 1]);
        if (cs[i].is_ascii_digit() || sign) && boundary {
            let start = i;
            i += 1;
            while i < cs.len() && (cs[i].is_ascii_digit() || matches!(cs[i], '.' | 'e' | 'E' | '+' | '-')) {
                i += 1;
            }
            let tok: String = cs[start..i].iter().collect();
            out.push(tok.trim_end_matches(['.', 'e', 'E', '-', '+']).to_string());
            while i < cs.len() && word(cs[i]) {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Numbers held anywhere in a JSON value, in the form serde_json writes them.
pub fn json_numbers(v: &Json, out: &mut BTreeMap<String, ()>) {
    match v {
        Json::Number(n) => {
            out.insert(n.to_string(), ());
        }
        Json::Array(a) => a.iter().for_each(|x| json_numbers(x, out)),
        Json::Object(o) => o.values().for_each(|x| json_numbers(x, out)),
        Json::String(s) => {
            for t in numeric_tokens(s) {
                out.insert(t, ());
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fit_linear, predict, ModelSpec};
    use crate::timeseries::{TimeGrid, TimeIndex, TimeTable, Timestamp};

    fn fixture() -> (ModelArtifact, PredictionTable) {
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 * x + 1.0 + if (*x as i64) % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let t = TimeTable::new(
            TimeIndex::Regular(TimeGrid::new(Timestamp(0), 180_000, 12).unwrap()),
            vec![("x".into(), x.into_iter().map(Some).collect()), ("y".into(), y.into_iter().map(Some).collect())],
        )
        .unwrap();
        let m = fit_linear(&t, &ModelSpec::linear("y", &["x"])).unwrap();
        let p = predict(&m, &t).unwrap();
        let pt = PredictionTable::new(&m, &t, p);
        (m, pt)
    }

    fn ctx() -> RunContext {
        RunContext {
            spec: ReportSpec {
                title: "Heat production".into(),
                generated_at: Some("2024-01-01T00:00:00Z".into()),
                reapply: Some(ReapplySpec {
                    merge_params: "merge.json".into(),
                    quality_params: "quality.json".into(),
                    sources: vec!["wearable.csv".into(), "chamber.csv".into()],
                    model: "out/model.json".into(),
                    out_dir: "reapply".into(),
                }),
            },
            inputs: vec![InputDigest { name: "metrics.json".into(), sha256: "ab".repeat(32) }],
        }
    }

    #[test]
    fn metrics_table_strings() {
        let (m, p) = fixture();
        let metrics = Metrics { rmse: 1.5, mae: 1.0, r2: Some(0.9), n: 12, note: None };
        let md = generate_report(&metrics, &m, &p, &ctx()).unwrap().to_markdown();
        assert!(md.contains("| rmse | 1.5 |"));
        assert!(md.contains("| mae | 1.0 |"));
        assert!(md.contains("| r2 | 0.9 |"));
    }

    #[test]
    fn deterministic_and_numbers_traceable() {
        let (m, p) = fixture();
        let metrics = Metrics { rmse: 0.1, mae: 0.1, r2: Some(0.99), n: 12, note: None };
        let a = generate_report(&metrics, &m, &p, &ctx()).unwrap();
        let b = generate_report(&metrics, &m, &p, &ctx()).unwrap();
        assert_eq!(a.to_markdown(), b.to_markdown());
        assert_eq!(a.to_json(), b.to_json());
        let mut known = BTreeMap::new();
        json_numbers(&serde_json::to_value(&a).unwrap(), &mut known);
        for tok in numeric_tokens(&a.to_markdown()) {
            assert!(known.contains_key(&tok), "`{tok}` is not in the JSON");
        }
    }

    #[test]
    fn empty_metrics() {
        let (m, p) = fixture();
        let metrics = Metrics { rmse: 0.0, mae: 0.0, r2: None, n: 0, note: None };
        assert_eq!(generate_report(&metrics, &m, &p, &ctx()).unwrap_err(), ReportError::EmptyMetrics);
    }

    #[test]
    fn tokens() {
        assert_eq!(numeric_tokens("| rmse | 1.5 | and -2e-3, r2 x86 sha256 12."), vec!["1.5", "-2e-3", "12"]);
    }
}
