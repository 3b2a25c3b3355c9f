//! Regression models: ordinary least squares and a CART regression forest,
//! evaluation metrics, and versioned JSON artifacts.

mod artifact;
mod forest;
mod linear;
mod metrics;
mod table;

pub use artifact::{load_model, model_from_bytes, model_to_bytes, save_model, ModelArtifact, ModelMetadata, Payload, MODEL_SCHEMA_VERSION};
pub use forest::{Node, Tree, SEED_RULE};
pub use linear::LinearModel;
pub use metrics::{evaluate, Metrics};
pub use table::PredictionTable;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{TimeTable, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("table has no column `{0}`")]
    MissingFeatureColumn(String),
    #[error("need at least {needed} complete rows, got {got}")]
    InsufficientRows { needed: usize, got: usize },
    #[error("every row has a MISSING feature or target value")]
    AllRowsIncomplete,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("column `{column}` has unit `{found}`, the model was trained on `{expected}`")]
    ModelTableSchemaMismatch { column: String, expected: String, found: String },
    #[error("unsupported model schema version {0}")]
    UnsupportedSchemaVersion(u32),
    #[error("corrupt model artifact: {0}")]
    CorruptArtifact(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("predictions and actuals differ in length ({predictions} vs {actuals})")]
    LengthMismatch { predictions: usize, actuals: usize },
    #[error("no row has both a prediction and an actual value")]
    NoComparablePairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    RandomForest,
}

fn default_n_trees() -> usize {
    100
}
fn default_min_leaf() -> usize {
    5
}
fn default_ridge() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub target: String,
    pub features: Vec<String>,
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    /// `None` grows trees until the leaf-size or variance rule stops them.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `ceil(p / 3)`.
    #[serde(default)]
    pub mtry: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Draw a bootstrap sample per tree (otherwise every tree sees all rows).
    #[serde(default = "default_true")]
    pub bootstrap: bool,
    #[serde(default = "default_ridge")]
    pub ridge_epsilon: f64,
}

impl ModelSpec {
    pub fn linear(target: &str, features: &[&str]) -> Self {
        ModelSpec {
            kind: ModelKind::Linear,
            target: target.into(),
            features: features.iter().map(|s| s.to_string()).collect(),
            n_trees: default_n_trees(),
            max_depth: None,
            min_samples_leaf: default_min_leaf(),
            mtry: None,
            seed: 0,
            bootstrap: true,
            ridge_epsilon: default_ridge(),
        }
    }

    pub fn forest(target: &str, features: &[&str], seed: u64) -> Self {
        ModelSpec { kind: ModelKind::RandomForest, seed, ..Self::linear(target, features) }
    }

    pub fn effective_mtry(&self) -> usize {
        self.mtry.unwrap_or_else(|| self.features.len().div_ceil(3))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidSpec(m));
        if self.features.is_empty() {
            return bad("features must not be empty".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f) {
                return bad(format!("feature `{f}` listed twice"));
            }
        }
        if seen.contains(&self.target) {
            return bad(format!("target `{}` is also a feature", self.target));
        }
        if self.n_trees < 1 {
            return bad("n_trees must be >= 1".into());
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1".into());
        }
        let m = self.effective_mtry();
        if m < 1 || m > self.features.len() {
            return bad(format!("mtry must lie in 1..={}, got {m}", self.features.len()));
        }
        if !(self.ridge_epsilon > 0.0 && self.ridge_epsilon.is_finite()) {
            return bad("ridge_epsilon must be > 0".into());
        }
        Ok(())
    }
}

/// Complete rows of the feature matrix (row-major) and target.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: usize,
    pub rows: Vec<usize>,
    pub excluded: usize,
}

impl Design {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn at(&self, i: usize, f: usize) -> f64 {
        self.x[i * self.p + f]
    }
}

fn feature_columns<'a>(table: &'a TimeTable, features: &[String]) -> Result<Vec<&'a [Value]>, ModelError> {
    features
        .iter()
        .map(|f| table.column(f).ok_or_else(|| ModelError::MissingFeatureColumn(f.clone())))
        .collect()
}

pub(crate) fn design(table: &TimeTable, spec: &ModelSpec) -> Result<Design, ModelError> {
    let cols = feature_columns(table, &spec.features)?;
    let target = table.column(&spec.target).ok_or_else(|| ModelError::MissingFeatureColumn(spec.target.clone()))?;
    let p = cols.len();
    let mut d = Design { x: Vec::new(), y: Vec::new(), p, rows: Vec::new(), excluded: 0 };
    for r in 0..table.rows() {
        let row: Option<Vec<f64>> = cols.iter().map(|c| c[r]).collect();
        match (row, target[r]) {
            (Some(row), Some(y)) => {
                d.x.extend(row);
                d.y.push(y);
                d.rows.push(r);
            }
            _ => d.excluded += 1,
        }
    }
    if d.y.is_empty() {
        return Err(ModelError::AllRowsIncomplete);
    }
    Ok(d)
}

/// Trains the model named by `spec.kind`.
pub fn fit(train: &TimeTable, spec: &ModelSpec) -> Result<ModelArtifact, ModelError> {
    match spec.kind {
        ModelKind::Linear => fit_linear(train, spec),
        ModelKind::RandomForest => fit_forest(train, spec),
    }
}

pub fn fit_linear(train: &TimeTable, spec: &ModelSpec) -> Result<ModelArtifact, ModelError> {
    spec.validate()?;
    let d = design(train, spec)?;
    let needed = spec.features.len() + 1;
    if d.n() < needed {
        return Err(ModelError::InsufficientRows { needed, got: d.n() });
    }
    let (model, ridge_applied) = linear::fit(&d, spec.ridge_epsilon)?;
    Ok(ModelArtifact::build(spec, Payload::Linear(model), train, &d, ridge_applied))
}

pub fn fit_forest(train: &TimeTable, spec: &ModelSpec) -> Result<ModelArtifact, ModelError> {
    fit_forest_with_threads(train, spec, None)
}

/// Forest training on a pool of `threads` workers (`None`: the global pool).
/// The result does not depend on the thread count.
pub fn fit_forest_with_threads(
    train: &TimeTable,
    spec: &ModelSpec,
    threads: Option<usize>,
) -> Result<ModelArtifact, ModelError> {
    spec.validate()?;
    let d = design(train, spec)?;
    let needed = (2 * spec.min_samples_leaf).max(2);
    if d.n() < needed {
        return Err(ModelError::InsufficientRows { needed, got: d.n() });
    }
    let trees = forest::fit(&d, spec, threads)?;
    Ok(ModelArtifact::build(spec, Payload::RandomForest { trees }, train, &d, false))
}

/// Per-row predictions; rows with a MISSING feature are MISSING and unusable.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub values: Vec<Value>,
    pub usable: Vec<bool>,
}

pub fn predict(model: &ModelArtifact, table: &TimeTable) -> Result<Prediction, ModelError> {
    let features = &model.spec.features;
    let cols = feature_columns(table, features)?;
    for f in features {
        if let (Some(expected), Some(found)) = (model.metadata.feature_units.get(f), table.unit(f)) {
            if expected != found {
                return Err(ModelError::ModelTableSchemaMismatch {
                    column: f.clone(),
                    expected: expected.clone(),
                    found: found.to_string(),
                });
            }
        }
    }
    let mut values = Vec::with_capacity(table.rows());
    let mut row = vec![0.0; features.len()];
    for r in 0..table.rows() {
        let mut complete = true;
        for (j, c) in cols.iter().enumerate() {
            match c[r] {
                Some(x) => row[j] = x,
                None => complete = false,
            }
        }
        values.push(complete.then(|| model.predict_row(&row)));
    }
    let usable = values.iter().map(Option::is_some).collect();
    Ok(Prediction { values, usable })
}

/// Units of the given columns where the table declares them.
pub(crate) fn units_of(table: &TimeTable, names: &[String]) -> BTreeMap<String, String> {
    names.iter().filter_map(|n| table.unit(n).map(|u| (n.clone(), u.to_string()))).collect()
}
