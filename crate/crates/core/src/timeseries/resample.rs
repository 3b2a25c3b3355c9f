use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{present, RawChannel, TimeGrid, TimeSeriesError, Value};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleKind {
    #[default]
    HoldLast,
    LinearInterpolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DownsampleKind {
    #[default]
    Mean,
    Median,
    Last,
    Sum,
}

impl DownsampleKind {
    pub(crate) fn apply(self, xs: &[f64]) -> Option<f64> {
        match self {
            DownsampleKind::Mean => stats::mean(xs),
            DownsampleKind::Median => stats::median(xs),
            DownsampleKind::Last => xs.last().copied(),
            DownsampleKind::Sum => stats::sum(xs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ResamplePolicy {
    #[serde(rename = "upsample")]
    pub upsample_kind: UpsampleKind,
    #[serde(rename = "downsample")]
    pub downsample_kind: DownsampleKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gap_ms: Option<u64>,
}

impl ResamplePolicy {
    pub fn validate(&self) -> Result<(), TimeSeriesError> {
        if self.max_gap_ms == Some(0) {
            return Err(TimeSeriesError::InvalidPolicy("max_gap_ms must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleDirection {
    /// Channel is faster than (or as fast as) the grid: cells aggregate.
    Downsampled,
    /// Channel is slower than the grid: cells are filled.
    Upsampled,
}

pub fn resample_direction(channel: &RawChannel, grid: &TimeGrid) -> ResampleDirection {
    match channel.rate().cmp_period(grid.period_ms) {
        Ordering::Less => ResampleDirection::Upsampled,
        _ => ResampleDirection::Downsampled,
    }
}

/// Places a channel onto `grid`.
///
/// Downsampling aggregates the present samples of each half-open cell
/// `[t, t + period)`; an empty or all-MISSING cell is MISSING. Upsampling
/// holds or interpolates from the surrounding samples; a MISSING neighbour
/// yields MISSING, and so does any bridge longer than `max_gap_ms`.
pub fn resample(channel: &RawChannel, grid: &TimeGrid, policy: &ResamplePolicy) -> Result<Vec<Value>, TimeSeriesError> {
    if channel.is_empty() {
        return Err(TimeSeriesError::EmptyChannel(channel.name().to_string()));
    }
    policy.validate()?;
    let out = match resample_direction(channel, grid) {
        ResampleDirection::Downsampled => grid
            .points()
            .map(|t| {
                let r = channel.range_of(t.0, t.0 + grid.period_ms as i64);
                let xs = present(channel.samples()[r].iter().map(|s| s.value));
                policy.downsample_kind.apply(&xs)
            })
            .collect(),
        ResampleDirection::Upsampled => {
            let samples = channel.samples();
            let max_gap = policy.max_gap_ms.map(|g| g as i64);
            grid.points()
                .map(|t| {
                    // index of the first sample strictly after t
                    let after = samples.partition_point(|s| s.t <= t);
                    let prev = after.checked_sub(1).map(|i| &samples[i]);
                    let prev = prev?;
                    if prev.t == t {
                        return prev.value;
                    }
                    match policy.upsample_kind {
                        UpsampleKind::HoldLast => {
                            if max_gap.is_some_and(|g| t.0 - prev.t.0 > g) {
                                None
                            } else {
                                prev.value
                            }
                        }
                        UpsampleKind::LinearInterpolate => {
                            let next = samples.get(after)?;
                            if max_gap.is_some_and(|g| next.t.0 - prev.t.0 > g) {
                                return None;
                            }
                            let (a, b) = (prev.value?, next.value?);
                            let frac = (t.0 - prev.t.0) as f64 / (next.t.0 - prev.t.0) as f64;
                            Some(a + frac * (b - a))
                        }
                    }
                })
                .collect()
        }
    };
    Ok(out)
}
