use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{RawChannel, TimeGrid, TimeSeriesError, Value};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Std,
    Min,
    Max,
    Slope,
    Sum,
    Median,
    Last,
}

impl Aggregation {
    pub fn suffix(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Std => "std",
            Aggregation::Min => "min",
            Aggregation::Max => "max",
            Aggregation::Slope => "slope",
            Aggregation::Sum => "sum",
            Aggregation::Median => "median",
            Aggregation::Last => "last",
        }
    }

    /// `secs` are sample times in seconds, `xs` the matching present values.
    fn apply(self, secs: &[f64], xs: &[f64]) -> Value {
        match self {
            Aggregation::Mean => stats::mean(xs),
            Aggregation::Std => stats::sample_std(xs),
            Aggregation::Min => stats::min(xs),
            Aggregation::Max => stats::max(xs),
            Aggregation::Sum => stats::sum(xs),
            Aggregation::Median => stats::median(xs),
            Aggregation::Last => xs.last().copied(),
            Aggregation::Slope => stats::ols_slope(secs, xs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelAlignment {
    /// The grid point closes the window: `[t - window, t)`.
    #[default]
    WindowEnd,
    /// The grid point opens the window: `[t, t + window)`.
    WindowStart,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub window_ms: u64,
    pub aggregations: BTreeSet<Aggregation>,
    #[serde(default)]
    pub label_alignment: LabelAlignment,
}

impl FeatureSpec {
    pub fn validate(&self, period_ms: u64) -> Result<(), TimeSeriesError> {
        if self.aggregations.is_empty() {
            return Err(TimeSeriesError::NoAggregations);
        }
        if self.window_ms == 0 || !self.window_ms.is_multiple_of(period_ms) {
            return Err(TimeSeriesError::IncompatibleWindow { window_ms: self.window_ms, period_ms });
        }
        Ok(())
    }
}

/// Computes windowed features for each grid point. Output columns are named
/// `<channel>_<aggregation>` and come out in aggregation order.
pub fn window_aggregate(
    channel: &RawChannel,
    spec: &FeatureSpec,
    grid: &TimeGrid,
) -> Result<Vec<(String, Vec<Value>)>, TimeSeriesError> {
    spec.validate(grid.period_ms)?;
    let w = spec.window_ms as i64;
    let mut out: Vec<(String, Vec<Value>)> = spec
        .aggregations
        .iter()
        .map(|a| (format!("{}_{}", channel.name(), a.suffix()), Vec::with_capacity(grid.count)))
        .collect();
    for t in grid.points() {
        let (lo, hi) = match spec.label_alignment {
            LabelAlignment::WindowEnd => (t.0 - w, t.0),
            LabelAlignment::WindowStart => (t.0, t.0 + w),
        };
        let window = &channel.samples()[channel.range_of(lo, hi)];
        let mut secs = Vec::with_capacity(window.len());
        let mut xs = Vec::with_capacity(window.len());
        for s in window {
            if let Some(v) = s.value {
                secs.push((s.t.0 - lo) as f64 / 1000.0);
                xs.push(v);
            }
        }
        for (agg, (_, col)) in spec.aggregations.iter().zip(out.iter_mut()) {
            col.push(agg.apply(&secs, &xs));
        }
    }
    Ok(out)
}
