//! Quality check: outlier flags, missing-data handling and per-column
//! summaries emitted as plot-ready data.

mod missing;
mod outliers;
mod summary;

pub use missing::{handle_missing, Gap, MissingOutcome};
pub use outliers::{detect_outliers, ColumnOutliers, OutlierMask};
pub use summary::{ColumnQuality, Extremum, FiveNumber, Histogram, QualityReport, HISTOGRAM_BINS, QUARTILE_METHOD};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{TimeSeriesError, TimeTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("invalid quality spec: {0}")]
    InvalidSpec(String),
    #[error("quality spec refers to unknown column `{0}`")]
    UnknownColumn(String),
    #[error("missing value in column `{column}` at {timestamp_ms} ms")]
    MissingDataFound { column: String, timestamp_ms: i64 },
    #[error("column `{0}` has no values to fill from")]
    AllMissingColumn(String),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMethod {
    /// Flags `|x - mean| > k * std` (sample std over present cells).
    Zscore { k: f64 },
    /// Flags cells outside `[Q1 - factor * IQR, Q3 + factor * IQR]`.
    Iqr { factor: f64 },
    None,
}

impl Default for OutlierMethod {
    fn default() -> Self {
        OutlierMethod::Iqr { factor: 1.5 }
    }
}

impl OutlierMethod {
    fn validate(&self) -> Result<(), QualityError> {
        match *self {
            OutlierMethod::Zscore { k } if !(k > 0.0 && k.is_finite()) => {
                Err(QualityError::InvalidSpec(format!("zscore k must be > 0, got {k}")))
            }
            OutlierMethod::Iqr { factor } if !(factor > 0.0 && factor.is_finite()) => {
                Err(QualityError::InvalidSpec(format!("iqr factor must be > 0, got {factor}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutlierAction {
    #[default]
    FlagOnly,
    SetMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    DropRow,
    LinearInterpolate { max_gap_cells: usize },
    ForwardFill { max_gap_cells: usize },
    Fail,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        MissingPolicy::LinearInterpolate { max_gap_cells: 3 }
    }
}

/// Inclusive physically plausible range of a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalRange {
    pub min: f64,
    pub max: f64,
}

impl PhysicalRange {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ColumnOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_method: Option<OutlierMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct QualitySpec {
    pub outlier_method: OutlierMethod,
    pub outlier_action: OutlierAction,
    pub missing_policy: MissingPolicy,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub per_column: BTreeMap<String, ColumnOverride>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub physical_range: BTreeMap<String, PhysicalRange>,
}

impl QualitySpec {
    pub fn validate(&self) -> Result<(), QualityError> {
        self.outlier_method.validate()?;
        for o in self.per_column.values() {
            if let Some(m) = &o.outlier_method {
                m.validate()?;
            }
        }
        for (c, r) in &self.physical_range {
            if !(r.min <= r.max) {
                return Err(QualityError::InvalidSpec(format!("physical range of `{c}` is empty")));
            }
        }
        match self.missing_policy {
            MissingPolicy::LinearInterpolate { max_gap_cells } | MissingPolicy::ForwardFill { max_gap_cells }
                if max_gap_cells < 1 =>
            {
                Err(QualityError::InvalidSpec("max_gap_cells must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Fails on overrides or ranges naming columns the table lacks.
    pub fn check_columns(&self, table: &TimeTable) -> Result<(), QualityError> {
        for c in self.per_column.keys().chain(self.physical_range.keys()) {
            if table.position(c).is_none() {
                return Err(QualityError::UnknownColumn(c.clone()));
            }
        }
        Ok(())
    }

    pub fn method_for(&self, column: &str) -> OutlierMethod {
        self.per_column.get(column).and_then(|o| o.outlier_method).unwrap_or(self.outlier_method)
    }
}

/// Detect, apply the outlier action, handle missing data, then summarise.
pub fn quality_check(table: &TimeTable, spec: &QualitySpec) -> Result<(TimeTable, QualityReport), QualityError> {
    spec.validate()?;
    let mask = detect_outliers(table, spec)?;
    let missing_before: Vec<Vec<usize>> = table
        .columns()
        .map(|(_, c)| c.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect())
        .collect();

    let mut working = table.clone();
    let mut set_missing = vec![0usize; table.names().len()];
    if spec.outlier_action == OutlierAction::SetMissing {
        for (k, col) in mask.columns.iter().enumerate() {
            if !col.any() {
                continue;
            }
            let mut values = working.column(&col.name).expect("mask built from table").to_vec();
            for (i, flagged) in col.flagged.iter().enumerate() {
                if *flagged && values[i].is_some() {
                    values[i] = None;
                    set_missing[k] += 1;
                }
            }
            working.replace_column(&col.name, values)?;
        }
    }
    let (cleaned, outcome) = handle_missing(&working, spec)?;
    let report = QualityReport::build(table, &cleaned, spec, &mask, &missing_before, &set_missing, &outcome);
    Ok((cleaned, report))
}
