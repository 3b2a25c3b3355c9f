use serde::{Deserialize, Serialize};

use super::{OutlierMethod, QualityError, QualitySpec};
use crate::stats;
use crate::timeseries::{present, TimeTable, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnOutliers {
    pub name: String,
    /// Statistical outliers or range violations.
    pub flagged: Vec<bool>,
    /// Physical range violations only.
    pub out_of_range: Vec<bool>,
}

impl ColumnOutliers {
    pub fn any(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }

    pub fn count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierMask {
    pub columns: Vec<ColumnOutliers>,
}

impl OutlierMask {
    pub fn column(&self, name: &str) -> Option<&ColumnOutliers> {
        self.columns.iter().find(|c| c.name == name)
    }
}

fn statistical_flags(values: &[Value], method: OutlierMethod) -> Vec<bool> {
    let xs = present(values.iter().copied());
    let outside: Box<dyn Fn(f64) -> bool> = match method {
        OutlierMethod::None => return vec![false; values.len()],
        OutlierMethod::Zscore { k } => match (stats::mean(&xs), stats::sample_std(&xs)) {
            (Some(m), Some(s)) if s > 0.0 => Box::new(move |x| (x - m).abs() > k * s),
            _ => return vec![false; values.len()],
        },
        OutlierMethod::Iqr { factor } => {
            let sorted = stats::sorted(&xs);
            match (stats::quantile_sorted(&sorted, 0.25), stats::quantile_sorted(&sorted, 0.75)) {
                (Some(q1), Some(q3)) => {
                    let iqr = q3 - q1;
                    let (lo, hi) = (q1 - factor * iqr, q3 + factor * iqr);
                    Box::new(move |x| x < lo || x > hi)
                }
                _ => return vec![false; values.len()],
            }
        }
    };
    values.iter().map(|v| v.is_some_and(&outside)).collect()
}

/// Per-column outlier mask. MISSING cells are never flagged.
pub fn detect_outliers(table: &TimeTable, spec: &QualitySpec) -> Result<OutlierMask, QualityError> {
    spec.validate()?;
    spec.check_columns(table)?;
    let columns = table
        .columns()
        .map(|(name, values)| {
            let mut flagged = statistical_flags(values, spec.method_for(name));
            let out_of_range: Vec<bool> = match spec.physical_range.get(name) {
                Some(r) => values.iter().map(|v| v.is_some_and(|x| !r.contains(x))).collect(),
                None => vec![false; values.len()],
            };
            for (f, r) in flagged.iter_mut().zip(&out_of_range) {
                *f |= *r;
            }
            ColumnOutliers { name: name.to_string(), flagged, out_of_range }
        })
        .collect();
    Ok(OutlierMask { columns })
}

#[cfg(test)]
mod tests {
    use super::super::tests::table;
    use super::super::{PhysicalRange, QualitySpec};
    use super::*;

    #[test]
    fn single_spike_zscore() {
        // Hand computation: mean = 1, sample variance = (99 * 1 + 99^2) / 99 = 100,
        // so the spike sits at z = 99 / 10 = 9.9 and every zero at z = 0.1.
        let mut v = vec![Some(0.0); 99];
        v.push(Some(100.0));
        let t = table(vec![("a", v)]);
        let spec = QualitySpec { outlier_method: OutlierMethod::Zscore { k: 3.0 }, ..Default::default() };
        let m = detect_outliers(&t, &spec).unwrap();
        let flagged: Vec<usize> = m.columns[0].flagged.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect();
        assert_eq!(flagged, vec![99]);
        let spec = QualitySpec { outlier_method: OutlierMethod::Zscore { k: 9.8 }, ..Default::default() };
        assert_eq!(detect_outliers(&t, &spec).unwrap().columns[0].count(), 1);
        let spec = QualitySpec { outlier_method: OutlierMethod::Zscore { k: 9.95 }, ..Default::default() };
        assert_eq!(detect_outliers(&t, &spec).unwrap().columns[0].count(), 0);
    }

    #[test]
    fn constant_column_flags_nothing() {
        let t = table(vec![("a", vec![Some(4.0); 30])]);
        for method in [OutlierMethod::Zscore { k: 0.5 }, OutlierMethod::Iqr { factor: 0.1 }, OutlierMethod::None] {
            let spec = QualitySpec { outlier_method: method, ..Default::default() };
            assert_eq!(detect_outliers(&t, &spec).unwrap().columns[0].count(), 0);
        }
    }

    #[test]
    fn physical_range_violation() {
        let t = table(vec![("shell_opening", vec![Some(10.0), Some(-1.0), Some(12.0), None])]);
        let mut spec = QualitySpec { outlier_method: OutlierMethod::None, ..Default::default() };
        spec.physical_range.insert("shell_opening".into(), PhysicalRange { min: 0.0, max: 60.0 });
        let m = detect_outliers(&t, &spec).unwrap();
        assert_eq!(m.columns[0].out_of_range, vec![false, true, false, false]);
        assert_eq!(m.columns[0].flagged, vec![false, true, false, false]);
    }

    #[test]
    fn unknown_override_column() {
        let t = table(vec![("a", vec![Some(1.0)])]);
        let mut spec = QualitySpec::default();
        spec.per_column.insert("b".into(), Default::default());
        assert_eq!(detect_outliers(&t, &spec).unwrap_err(), QualityError::UnknownColumn("b".into()));
    }

    #[test]
    fn iqr_fences() {
        // quartiles of 1..=8 (type 7): Q1 = 2.75, Q3 = 6.25, IQR = 3.5
        let mut v: Vec<Value> = (1..=8).map(|i| Some(i as f64)).collect();
        v.push(Some(11.5)); // 6.25 + 1.5 * 3.5 = 11.5 -> on the fence, not flagged
        let t = table(vec![("a", v)]);
        let spec = QualitySpec::default();
        // with the 11.5 appended the quartiles move: Q1 = 3, Q3 = 7, fence = 13
        assert_eq!(detect_outliers(&t, &spec).unwrap().columns[0].count(), 0);
        let mut v: Vec<Value> = (1..=8).map(|i| Some(i as f64)).collect();
        v.push(Some(13.5));
        let t = table(vec![("a", v)]);
        assert!(detect_outliers(&t, &spec).unwrap().columns[0].flagged[8]);
    }
}
