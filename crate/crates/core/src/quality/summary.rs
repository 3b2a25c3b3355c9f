use serde::{Deserialize, Serialize};

use super::{Gap, MissingOutcome, OutlierMask, QualitySpec};
use crate::stats;
use crate::timeseries::{present, TimeTable};

pub const HISTOGRAM_BINS: usize = 20;
pub const QUARTILE_METHOD: &str =
    "type 7: linear interpolation between order statistics, h = (n - 1) q, MISSING excluded";
pub const QUALITY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub timestamp_ms: i64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnQuality {
    pub name: String,
    /// Rows in the checked table.
    pub count: usize,
    pub missing_before: usize,
    pub missing_after: usize,
    pub outliers_flagged: usize,
    pub out_of_range: usize,
    pub outliers_set_missing: usize,
    pub filled: usize,
    pub unfilled_gaps: Vec<Gap>,
    pub flagged_at_ms: Vec<i64>,
    pub missing_at_ms: Vec<i64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub boxplot: Option<FiveNumber>,
    pub histogram: Option<Histogram>,
    pub min_at: Option<Extremum>,
    pub max_at: Option<Extremum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub schema_version: u32,
    pub quartile_method: String,
    pub rows_in: usize,
    pub rows_out: usize,
    pub rows_dropped: usize,
    /// False when dropped rows left an irregular time index.
    pub regular_index: bool,
    pub spec: QualitySpec,
    pub columns: Vec<ColumnQuality>,
}

impl QualityReport {
    pub fn column(&self, name: &str) -> Option<&ColumnQuality> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub(crate) fn build(
        input: &TimeTable,
        cleaned: &TimeTable,
        spec: &QualitySpec,
        mask: &OutlierMask,
        missing_before: &[Vec<usize>],
        set_missing: &[usize],
        outcome: &MissingOutcome,
    ) -> Self {
        let columns = input
            .names()
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let flags = &mask.columns[k];
                let values = cleaned.column(name).expect("same columns");
                let xs = present(values.iter().copied());
                let sorted = stats::sorted(&xs);
                let q = |p| stats::quantile_sorted(&sorted, p);
                let boxplot = match (q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)) {
                    (Some(min), Some(q1), Some(median), Some(q3), Some(max)) => Some(FiveNumber { min, q1, median, q3, max }),
                    _ => None,
                };
                let extremum = |pick_max: bool| {
                    let mut best: Option<(usize, f64)> = None;
                    for (i, v) in values.iter().enumerate() {
                        if let Some(x) = *v {
                            let better = match best {
                                None => true,
                                Some((_, b)) => if pick_max { x > b } else { x < b },
                            };
                            if better {
                                best = Some((i, x));
                            }
                        }
                    }
                    best.map(|(i, value)| Extremum { timestamp_ms: cleaned.timestamp(i).0, value })
                };
                ColumnQuality {
                    name: name.clone(),
                    count: cleaned.rows(),
                    missing_before: missing_before[k].len(),
                    missing_after: values.iter().filter(|v| v.is_none()).count(),
                    outliers_flagged: flags.count(),
                    out_of_range: flags.out_of_range.iter().filter(|&&f| f).count(),
                    outliers_set_missing: set_missing[k],
                    filled: outcome.filled.get(k).copied().unwrap_or(0),
                    unfilled_gaps: outcome.unfilled.get(k).cloned().unwrap_or_default(),
                    flagged_at_ms: flags
                        .flagged
                        .iter()
                        .enumerate()
                        .filter(|(_, f)| **f)
                        .map(|(i, _)| input.timestamp(i).0)
                        .collect(),
                    missing_at_ms: missing_before[k].iter().map(|&i| input.timestamp(i).0).collect(),
                    mean: stats::mean(&xs),
                    std: stats::sample_std(&xs),
                    histogram: histogram(&sorted),
                    boxplot,
                    min_at: extremum(false),
                    max_at: extremum(true),
                }
            })
            .collect();
        QualityReport {
            schema_version: QUALITY_SCHEMA_VERSION,
            quartile_method: QUARTILE_METHOD.to_string(),
            rows_in: input.rows(),
            rows_out: cleaned.rows(),
            rows_dropped: outcome.rows_dropped,
            regular_index: cleaned.is_regular(),
            spec: spec.clone(),
            columns,
        }
    }
}

/// 20 equal-width bins over `[min, max]`; the top edge is inclusive.
fn histogram(sorted: &[f64]) -> Option<Histogram> {
    let (lo, hi) = (*sorted.first()?, *sorted.last()?);
    let mut counts = vec![0; HISTOGRAM_BINS];
    let width = hi - lo;
    for &x in sorted {
        let b = if width > 0.0 { (((x - lo) / width) * HISTOGRAM_BINS as f64) as usize } else { 0 };
        counts[b.min(HISTOGRAM_BINS - 1)] += 1;
    }
    Some(Histogram { lo, hi, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 3);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[10], 1);
        assert_eq!(h.counts[19], 1);
        let h = histogram(&[2.0, 2.0]).unwrap();
        assert_eq!(h.counts[0], 2);
        assert!(histogram(&[]).is_none());
    }
}
