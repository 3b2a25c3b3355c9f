//! The pipeline components and their file contracts. Each component reads its
//! declared inputs, builds every output in memory and only then commits them
//! (temp file plus rename), so a failing step leaves no partial outputs.
//!
//! | component | params         | inputs                                   | outputs                              |
//! |-----------|----------------|------------------------------------------|--------------------------------------|
//! | merge     | `MergeSpec`    | the source files named in the merge spec | merged table, merge report           |
//! | quality   | `QualitySpec`  | merged table                             | checked table, quality report        |
//! | split     | `SplitSpec`    | checked table                            | train table, test table              |
//! | train     | `ModelSpec`    | train table                              | model artifact                       |
//! | predict   | none           | model artifact, table                    | predictions                          |
//! | evaluate  | none           | predictions                              | metrics                              |
//! | report    | `ReportSpec`   | metrics, model artifact, predictions     | report.md, report.json [, manifest]  |
//! | generate  | `ScenarioConfig` | none                                   | the generated files, by file name    |

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, IngestError, MergeSpec};
use crate::model::{self, Metrics, ModelError, ModelSpec, PredictionTable};
use crate::quality::{self, QualityError, QualitySpec};
use crate::report::{self, InputDigest, ReportError, ReportSpec, RunContext};
use crate::split::{self, SplitError, SplitSpec};
use crate::synth::{self, ScenarioConfig, SynthError};
use crate::digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Merge,
    Quality,
    Split,
    Train,
    Predict,
    Evaluate,
    Report,
    Generate,
}

impl Component {
    pub const ALL: [Component; 8] = [
        Component::Merge,
        Component::Quality,
        Component::Split,
        Component::Train,
        Component::Predict,
        Component::Evaluate,
        Component::Report,
        Component::Generate,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Component::Merge => "merge",
            Component::Quality => "quality",
            Component::Split => "split",
            Component::Train => "train",
            Component::Predict => "predict",
            Component::Evaluate => "evaluate",
            Component::Report => "report",
            Component::Generate => "generate",
        }
    }

    pub fn parse(s: &str) -> Option<Component> {
        Component::ALL.into_iter().find(|c| c.id() == s)
    }

    /// CLI subcommand running this component.
    pub fn subcommand(self) -> &'static str {
        match self {
            Component::Quality => "qc",
            other => other.id(),
        }
    }

    pub fn needs_params(self) -> bool {
        !matches!(self, Component::Predict | Component::Evaluate | Component::Report)
    }

    pub fn accepts_params(self) -> bool {
        !matches!(self, Component::Predict | Component::Evaluate)
    }

    /// Allowed (inputs, outputs) counts; `None` is unbounded.
    pub fn arity(self) -> ((usize, Option<usize>), (usize, Option<usize>)) {
        match self {
            Component::Merge => ((1, None), (2, Some(2))),
            Component::Quality | Component::Split => ((1, Some(1)), (2, Some(2))),
            Component::Train | Component::Evaluate => ((1, Some(1)), (1, Some(1))),
            Component::Predict => ((2, Some(2)), (1, Some(1))),
            Component::Report => ((3, Some(3)), (2, Some(3))),
            Component::Generate => ((0, Some(0)), (1, None)),
        }
    }

    /// Component version recorded in run records.
    pub fn version(self) -> String {
        format!("{}@{}", self.id(), crate::VERSION)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Broad failure class; the CLI maps it to an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    User,
    Io,
    Internal,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComponentError {
    #[error("{path}: cannot read parameters: {message}")]
    Params { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl ComponentError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ComponentError::Io { .. }
            | ComponentError::Ingest(IngestError::Io { .. } | IngestError::FileNotFound(_))
            | ComponentError::Model(ModelError::Io { .. }) => ErrorClass::Io,
            ComponentError::Report(ReportError::Inconsistent(_)) => ErrorClass::Internal,
            _ => ErrorClass::User,
        }
    }

    /// Variant name, for machine-readable error output.
    pub fn code(&self) -> String {
        let dbg = match self {
            ComponentError::Ingest(e) => format!("{e:?}"),
            ComponentError::Quality(e) => format!("{e:?}"),
            ComponentError::Split(e) => format!("{e:?}"),
            ComponentError::Model(e) => format!("{e:?}"),
            ComponentError::Report(e) => format!("{e:?}"),
            ComponentError::Synth(e) => format!("{e:?}"),
            other => format!("{other:?}"),
        };
        dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
    }
}

/// Run-level overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExecOptions {
    /// Replaces the seed of random splits, forests and generators.
    pub seed: Option<u64>,
}

fn io_err(path: &Path, e: impl fmt::Display) -> ComponentError {
    ComponentError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn read(path: &Path) -> Result<Vec<u8>, ComponentError> {
    std::fs::read(path).map_err(|e| io_err(path, e))
}

pub fn load_params<T: DeserializeOwned>(path: &Path) -> Result<T, ComponentError> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| ComponentError::Params { path: path.display().to_string(), message: e.to_string() })
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

fn check_arity(c: Component, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<(), ComponentError> {
    let ((imin, imax), (omin, omax)) = c.arity();
    let ok = |n: usize, min: usize, max: Option<usize>| n >= min && max.is_none_or(|m| n <= m);
    if !ok(inputs.len(), imin, imax) || !ok(outputs.len(), omin, omax) {
        return Err(ComponentError::Contract(format!(
            "{c} takes {imin}{} inputs and {omin}{} outputs, got {} and {}",
            imax.map_or("+".to_string(), |m| if m == imin { String::new() } else { format!("-{m}") }),
            omax.map_or("+".to_string(), |m| if m == omin { String::new() } else { format!("-{m}") }),
            inputs.len(),
            outputs.len()
        )));
    }
    Ok(())
}

fn require_params(c: Component, params: Option<&Path>) -> Result<&Path, ComponentError> {
    params.ok_or_else(|| ComponentError::Contract(format!("{c} needs a params file")))
}

/// Computes every output of a component without touching the disk.
pub fn produce(
    c: Component,
    params: Option<&Path>,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    opts: ExecOptions,
) -> Result<Vec<(PathBuf, Vec<u8>)>, ComponentError> {
    check_arity(c, inputs, outputs)?;
    if params.is_some() && !c.accepts_params() {
        return Err(ComponentError::Contract(format!("{c} takes no params file")));
    }
    let out = |i: usize, bytes: Vec<u8>| (outputs[i].clone(), bytes);
    match c {
        Component::Merge => {
            let p = require_params(c, params)?;
            let spec: MergeSpec = load_params(p)?;
            let base = p.parent().unwrap_or(Path::new("."));
            let (table, rep) = ingest::merge_sources(&spec, base)?;
            Ok(vec![out(0, ingest::write_table_csv(&table)), out(1, to_json_bytes(&rep))])
        }
        Component::Quality => {
            let spec: QualitySpec = load_params(require_params(c, params)?)?;
            let table = ingest::read_table(&inputs[0])?;
            let (clean, rep) = quality::quality_check(&table, &spec)?;
            Ok(vec![out(0, ingest::write_table_csv(&clean)), out(1, to_json_bytes(&rep))])
        }
        Component::Split => {
            let mut spec: SplitSpec = load_params(require_params(c, params)?)?;
            if let Some(s) = opts.seed {
                spec = spec.with_seed(s);
            }
            let table = ingest::read_table(&inputs[0])?;
            let (train, test, info) = split::split(&table, &spec)?;
            log::info!("split {} rows into {} train / {} test", info.rows, info.train_rows, info.test_rows);
            Ok(vec![out(0, ingest::write_table_csv(&train)), out(1, ingest::write_table_csv(&test))])
        }
        Component::Train => {
            let mut spec: ModelSpec = load_params(require_params(c, params)?)?;
            if let Some(s) = opts.seed {
                spec.seed = s;
            }
            let table = ingest::read_table(&inputs[0])?;
            let artifact = model::fit(&table, &spec)?;
            Ok(vec![out(0, model::model_to_bytes(&artifact))])
        }
        Component::Predict => {
            let artifact = model::model_from_bytes(&read(&inputs[0])?)?;
            let table = ingest::read_table(&inputs[1])?;
            let p = model::predict(&artifact, &table)?;
            Ok(vec![out(0, PredictionTable::new(&artifact, &table, p).to_csv())])
        }
        Component::Evaluate => {
            let label = inputs[0].display().to_string();
            let p = PredictionTable::from_csv(&read(&inputs[0])?, &label)?;
            let m = model::evaluate(&p.predicted, &p.actual)?;
            Ok(vec![out(0, to_json_bytes(&m))])
        }
        Component::Report => {
            let spec: ReportSpec = match params {
                Some(p) => load_params(p)?,
                None => ReportSpec::default(),
            };
            let metrics_bytes = read(&inputs[0])?;
            let model_bytes = read(&inputs[1])?;
            let pred_bytes = read(&inputs[2])?;
            let metrics: Metrics = serde_json::from_slice(&metrics_bytes)
                .map_err(|e| ComponentError::Contract(format!("{}: {e}", inputs[0].display())))?;
            let artifact = model::model_from_bytes(&model_bytes)?;
            let preds = PredictionTable::from_csv(&pred_bytes, &inputs[2].display().to_string())?;
            let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let ctx = RunContext {
                spec,
                inputs: [(&inputs[0], &metrics_bytes), (&inputs[1], &model_bytes), (&inputs[2], &pred_bytes)]
                    .into_iter()
                    .map(|(p, b)| InputDigest { name: name(p), sha256: digest::sha256_hex(b) })
                    .collect(),
            };
            let rep = report::generate_report(&metrics, &artifact, &preds, &ctx)?;
            let mut files = vec![out(0, rep.to_markdown().into_bytes()), out(1, rep.to_json())];
            if outputs.len() == 3 {
                let manifest = rep
                    .reapplication
                    .as_ref()
                    .ok_or_else(|| ComponentError::Contract("a manifest output needs `reapply` in the report params".into()))?;
                files.push(out(2, to_json_bytes(&manifest.manifest)));
            }
            Ok(files)
        }
        Component::Generate => {
            let mut cfg: ScenarioConfig = load_params(require_params(c, params)?)?;
            if let Some(s) = opts.seed {
                cfg.seed = s;
            }
            let files = synth::generate(&cfg)?;
            let mut result = Vec::new();
            for o in outputs {
                let name = o.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let bytes = files
                    .get(&name)
                    .ok_or_else(|| ComponentError::Contract(format!("generate does not produce `{name}`")))?;
                result.push((o.clone(), bytes.clone()));
            }
            let declared: std::collections::BTreeSet<_> = result.iter().map(|(p, _)| p.file_name().map(|n| n.to_owned())).collect();
            if let Some(missing) = files.keys().find(|k| !declared.contains(&Some(OsString::from(k.as_str())))) {
                return Err(ComponentError::Contract(format!("generated file `{missing}` is not a declared output")));
            }
            Ok(result)
        }
    }
}

/// [`produce`], then commit the outputs.
pub fn execute(
    c: Component,
    params: Option<&Path>,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    opts: ExecOptions,
) -> Result<(), ComponentError> {
    let files = produce(c, params, inputs, outputs, opts)?;
    digest::commit_all(&files).map_err(|e| io_err(&files.first().map(|f| f.0.clone()).unwrap_or_default(), e))
}

/// Command-line arguments running a component through the CLI binary.
pub fn cli_args(c: Component, params: Option<&Path>, inputs: &[PathBuf], outputs: &[PathBuf], opts: ExecOptions) -> Vec<OsString> {
    let mut a: Vec<OsString> = vec![c.subcommand().into()];
    let mut flag = |name: &str, p: &Path| {
        a.push(name.into());
        a.push(p.as_os_str().to_owned());
    };
    if let Some(p) = params {
        flag(if c == Component::Generate { "--config" } else { "--spec" }, p);
    }
    match c {
        Component::Merge => {
            flag("--out", &outputs[0]);
            flag("--report", &outputs[1]);
            for i in inputs {
                flag("--source", i);
            }
        }
        Component::Quality => {
            flag("--input", &inputs[0]);
            flag("--out", &outputs[0]);
            flag("--report", &outputs[1]);
        }
        Component::Split => {
            flag("--input", &inputs[0]);
            flag("--train", &outputs[0]);
            flag("--test", &outputs[1]);
        }
        Component::Train | Component::Evaluate => {
            flag("--input", &inputs[0]);
            flag("--out", &outputs[0]);
        }
        Component::Predict => {
            flag("--model", &inputs[0]);
            flag("--input", &inputs[1]);
            flag("--out", &outputs[0]);
        }
        Component::Report => {
            flag("--metrics", &inputs[0]);
            flag("--model", &inputs[1]);
            flag("--predictions", &inputs[2]);
            flag("--out", &outputs[0]);
            flag("--json", &outputs[1]);
            if let Some(m) = outputs.get(2) {
                flag("--manifest", m);
            }
        }
        Component::Generate => {
            for o in outputs {
                flag("--output", o);
            }
        }
    }
    if let Some(s) = opts.seed {
        a.push("--seed".into());
        a.push(s.to_string().into());
    }
    a
}
