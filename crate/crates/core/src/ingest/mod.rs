//! Sensor file parsing and the merge step that puts every source onto one grid.

mod csv;
mod merge;

pub use self::csv::{
    format_value, parse_csv, parse_csv_bytes, read_table, read_table_csv, serialize_channels, write_raw_csv,
    write_table_csv, ParseReport, TIMESTAMP_COLUMN,
};
pub use merge::{merge_channels, merge_sources, ChannelReport, ColumnFill, MergeDirection, MergeReport};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensors::SensorError;
use crate::timeseries::{FeatureSpec, GridStrategy, Rate, ResamplePolicy, TimeSeriesError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("{path}: no column `{column}` in header")]
    MissingColumn { path: String, column: String },
    #[error("{0}: file has no data rows")]
    EmptyFile(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: malformed CSV: {message}")]
    Csv { path: String, message: String },
    #[error("channel name `{0}` is produced more than once")]
    DuplicateChannelName(String),
    #[error("merge spec refers to unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("invalid merge spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    EpochMs,
    EpochS,
    ElapsedS,
    #[serde(rename = "iso8601", alias = "ISO-8601")]
    Iso8601,
}

/// Where a sensor file lives and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDescriptor {
    /// Relative paths resolve against the directory of the merge spec.
    pub path: PathBuf,
    pub channel_name: String,
    pub timestamp_column: String,
    pub value_columns: Vec<String>,
    pub timestamp_format: TimestampFormat,
    pub nominal_rate_hz: Rate,
    #[serde(default)]
    pub unit: String,
    /// Per-column unit overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub units: BTreeMap<String, String>,
}

impl SourceDescriptor {
    /// `<channel_name>.<value_column>`
    pub fn qualified_name(&self, column: &str) -> String {
        format!("{}.{}", self.channel_name, column)
    }

    pub fn unit_of(&self, column: &str) -> String {
        self.units.get(column).cloned().unwrap_or_else(|| self.unit.clone())
    }

    pub fn channel_names(&self) -> impl Iterator<Item = String> + '_ {
        self.value_columns.iter().map(|c| self.qualified_name(c))
    }
}

/// A software-sensor channel computed from parsed channels before merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivedChannel {
    Odba {
        name: String,
        x: String,
        y: String,
        z: String,
        #[serde(default = "default_static_window")]
        static_window_ms: u64,
    },
    OxygenUptake {
        name: String,
        dissolved_oxygen: String,
        volume_liters: f64,
        mass_kg: f64,
        slope_window_ms: u64,
    },
}

fn default_static_window() -> u64 {
    crate::sensors::DEFAULT_STATIC_WINDOW_MS
}

impl DerivedChannel {
    pub fn name(&self) -> &str {
        match self {
            DerivedChannel::Odba { name, .. } | DerivedChannel::OxygenUptake { name, .. } => name,
        }
    }

    pub fn inputs(&self) -> Vec<&str> {
        match self {
            DerivedChannel::Odba { x, y, z, .. } => vec![x, y, z],
            DerivedChannel::OxygenUptake { dissolved_oxygen, .. } => vec![dissolved_oxygen],
        }
    }
}

/// User instructions for the merge step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeSpec {
    pub sources: Vec<SourceDescriptor>,
    #[serde(default)]
    pub grid_strategy: GridStrategy,
    #[serde(default)]
    pub default_policy: ResamplePolicy,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_channel_policy: BTreeMap<String, ResamplePolicy>,
    /// Channels reduced to windowed features instead of resampled.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub feature_specs: BTreeMap<String, FeatureSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<DerivedChannel>,
    /// Channels used for the grid and derivations but left out of the output.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<String>,
}

impl MergeSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Source paths resolved against `base_dir`.
    pub fn source_paths(&self, base_dir: &Path) -> Vec<PathBuf> {
        self.sources.iter().map(|s| base_dir.join(&s.path)).collect()
    }
}
