use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::forest::{self, Tree, SEED_RULE};
use super::linear::LinearModel;
use super::{units_of, Design, ModelError, ModelKind, ModelSpec};
use crate::timeseries::TimeTable;
use crate::{digest, rng, stats};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Linear(LinearModel),
    RandomForest { trees: Vec<Tree> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub n_train: usize,
    pub n_excluded_incomplete: usize,
    pub feature_order: Vec<String>,
    pub train_start_ms: i64,
    pub train_end_ms: i64,
    /// Observed `[min, max]` of every feature in the training rows.
    pub feature_ranges: BTreeMap<String, [f64; 2]>,
    pub target_range: [f64; 2],
    pub feature_units: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_unit: Option<String>,
    pub ridge_applied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prng: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub spec: ModelSpec,
    pub payload: Payload,
    pub metadata: ModelMetadata,
    /// SHA-256 of the canonical JSON of every other field.
    pub content_hash: String,
}

fn range(xs: &[f64]) -> [f64; 2] {
    [stats::min(xs).unwrap_or(f64::NAN), stats::max(xs).unwrap_or(f64::NAN)]
}

impl ModelArtifact {
    pub(crate) fn build(spec: &ModelSpec, payload: Payload, train: &TimeTable, d: &Design, ridge_applied: bool) -> Self {
        let feature_ranges = spec
            .features
            .iter()
            .enumerate()
            .map(|(j, f)| (f.clone(), range(&(0..d.n()).map(|i| d.at(i, j)).collect::<Vec<_>>())))
            .collect();
        let forest = spec.kind == ModelKind::RandomForest;
        let metadata = ModelMetadata {
            n_train: d.n(),
            n_excluded_incomplete: d.excluded,
            feature_order: spec.features.clone(),
            train_start_ms: train.timestamp(d.rows[0]).0,
            train_end_ms: train.timestamp(*d.rows.last().expect("non-empty")).0,
            feature_ranges,
            target_range: range(&d.y),
            feature_units: units_of(train, &spec.features),
            target_unit: train.unit(&spec.target).map(str::to_string),
            ridge_applied,
            prng: forest.then(|| rng::PRNG_ID.to_string()),
            seed_rule: forest.then(|| SEED_RULE.to_string()),
        };
        let mut a = ModelArtifact {
            schema_version: MODEL_SCHEMA_VERSION,
            spec: spec.clone(),
            payload,
            metadata,
            content_hash: String::new(),
        };
        a.content_hash = a.compute_hash();
        a
    }

    pub fn compute_hash(&self) -> String {
        let body = ModelArtifact { content_hash: String::new(), ..self.clone() };
        digest::sha256_hex(&serde_json::to_vec(&body).expect("artifact serializes"))
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.payload {
            Payload::Linear(m) => m.predict_row(x),
            Payload::RandomForest { trees } => forest::predict_row(trees, x),
        }
    }

    fn check_structure(&self) -> Result<(), String> {
        let p = self.spec.features.len();
        if self.metadata.feature_order != self.spec.features {
            return Err("feature order differs from the model spec".into());
        }
        match &self.payload {
            Payload::Linear(m) if m.coefficients.len() != p => Err("coefficient count differs from feature count".into()),
            Payload::RandomForest { trees } if trees.is_empty() => Err("forest has no trees".into()),
            Payload::RandomForest { trees } => {
                for t in trees {
                    check_tree(t, p)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Every path ends at a leaf: children point strictly forward, are in range
/// and each node is reached once.
fn check_tree(t: &Tree, p: usize) -> Result<(), String> {
    use forest::Node;
    if t.nodes.is_empty() {
        return Err("empty tree".into());
    }
    let mut seen = vec![false; t.nodes.len()];
    seen[0] = true;
    for (i, node) in t.nodes.iter().enumerate() {
        if let Node::Split { feature, threshold, left, right } = *node {
            if feature >= p || !threshold.is_finite() {
                return Err(format!("node {i} has a bad feature or threshold"));
            }
            for c in [left, right] {
                if c <= i || c >= t.nodes.len() || seen[c] {
                    return Err(format!("node {i} has a bad child index"));
                }
                seen[c] = true;
            }
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err("tree has unreachable nodes".into())
    }
}

pub fn model_to_bytes(artifact: &ModelArtifact) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(artifact).expect("artifact serializes");
    out.push(b'\n');
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ModelArtifact, ModelError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ModelError::CorruptArtifact(format!("not valid JSON: {e}")))?;
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == MODEL_SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(ModelError::UnsupportedSchemaVersion(v as u32)),
        None => return Err(ModelError::CorruptArtifact("no schema_version".into())),
    }
    let a: ModelArtifact = serde_json::from_value(value).map_err(|e| ModelError::CorruptArtifact(e.to_string()))?;
    if a.compute_hash() != a.content_hash {
        return Err(ModelError::CorruptArtifact("content hash mismatch".into()));
    }
    a.check_structure().map_err(ModelError::CorruptArtifact)?;
    Ok(a)
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<(), ModelError> {
    digest::write_atomic(path, &model_to_bytes(artifact))
        .map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_model(path: &Path) -> Result<ModelArtifact, ModelError> {
    let bytes = std::fs::read(path).map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })?;
    model_from_bytes(&bytes)
}
