//! Time-grid data model: raw channels at their native rates, regular grids,
//! rectangular tables, and the operations that move data between them.

mod grid;
mod rate;
mod resample;
mod table;
mod window;

pub use grid::{infer_grid, GridStrategy};
pub use rate::Rate;
pub use resample::{resample, resample_direction, DownsampleKind, ResampleDirection, ResamplePolicy, UpsampleKind};
pub use table::{TimeIndex, TimeTable};
pub use window::{window_aggregate, Aggregation, FeatureSpec, LabelAlignment};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds since the dataset (or epoch) origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn offset(self, ms: i64) -> Timestamp {
        Timestamp(self.0 + ms)
    }
}

/// A cell value; `None` is the MISSING marker.
pub type Value = Option<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: Timestamp,
    pub value: Value,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeSeriesError {
    #[error("channel `{0}` has no samples")]
    EmptyChannel(String),
    #[error("channel `{channel}`: timestamp at index {index} does not increase")]
    NonmonotonicTimestamps { channel: String, index: usize },
    #[error("invalid sampling rate `{0}`")]
    InvalidRate(String),
    #[error("window of {window_ms} ms is not a positive multiple of the grid period {period_ms} ms")]
    IncompatibleWindow { window_ms: u64, period_ms: u64 },
    #[error("channels have no common time range")]
    NoTemporalOverlap,
    #[error("master channel `{0}` is not among the inputs")]
    UnknownMasterChannel(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("column `{column}` has {len} entries, expected {expected}")]
    NotRectangular { column: String, len: usize, expected: usize },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column names must be non-empty")]
    EmptyColumnName,
    #[error("feature spec needs at least one aggregation")]
    NoAggregations,
}

/// One sensor stream at its own native rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawChannel {
    name: String,
    unit: String,
    rate: Rate,
    samples: Vec<Sample>,
}

impl RawChannel {
    /// Checks that timestamps strictly increase.
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        rate: Rate,
        samples: Vec<Sample>,
    ) -> Result<Self, TimeSeriesError> {
        let name = name.into();
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(TimeSeriesError::NonmonotonicTimestamps { channel: name, index: i + 1 });
        }
        Ok(Self { name, unit: unit.into(), rate, samples })
    }

    /// Convenience constructor for a regularly sampled, fully present series.
    pub fn regular(
        name: impl Into<String>,
        unit: impl Into<String>,
        rate: Rate,
        start: Timestamp,
        values: &[f64],
    ) -> Self {
        let num = rate.numer() as i128;
        let den = rate.denom() as i128;
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample {
                // exact: i / rate seconds, floored to the millisecond
                t: start.offset((i as i128 * 1000 * den / num) as i64),
                value: Some(v),
            })
            .collect();
        Self::new(name, unit, rate, samples).expect("regular timestamps increase")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First and last timestamps.
    pub fn span(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        self.samples.iter().map(|s| s.value)
    }

    /// Index range of samples with `lo <= t < hi`.
    pub(crate) fn range_of(&self, lo: i64, hi: i64) -> std::ops::Range<usize> {
        let a = self.samples.partition_point(|s| s.t.0 < lo);
        let b = self.samples.partition_point(|s| s.t.0 < hi);
        a..b.max(a)
    }
}

/// A regular time grid: point `i` is `start + i * period_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: Timestamp,
    pub period_ms: u64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(start: Timestamp, period_ms: u64, count: usize) -> Result<Self, TimeSeriesError> {
        if period_ms == 0 {
            return Err(TimeSeriesError::InvalidGrid("period must be positive".into()));
        }
        if count == 0 {
            return Err(TimeSeriesError::InvalidGrid("count must be positive".into()));
        }
        Ok(Self { start, period_ms, count })
    }

    pub fn point(&self, i: usize) -> Timestamp {
        self.start.offset(i as i64 * self.period_ms as i64)
    }

    pub fn points(&self) -> impl Iterator<Item = Timestamp> + '_ {
        (0..self.count).map(|i| self.point(i))
    }

    pub fn end(&self) -> Timestamp {
        self.point(self.count - 1)
    }

    pub fn rate(&self) -> Rate {
        Rate::from_period_ms(self.period_ms).expect("period is positive")
    }
}

/// Strips MISSING entries.
pub(crate) fn present(values: impl IntoIterator<Item = Value>) -> Vec<f64> {
    values.into_iter().flatten().collect()
}
