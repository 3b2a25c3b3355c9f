//! Train/test partitioning of a quality-checked table.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::timeseries::TimeTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("need at least 2 rows with a target value and a non-empty train and test side, got {0} rows")]
    TooFewRows(usize),
    #[error("target column `{0}` is not in the table")]
    MissingTargetColumn(String),
    #[error("train_fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Earliest rows train, latest rows test.
    Chronological,
    /// Seeded Fisher–Yates shuffle, then the same cut.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
    pub target_column: String,
}

impl SplitSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let SplitMode::Random { seed: s } = &mut self.mode {
            *s = seed;
        }
        self
    }
}

/// How a split was made; echoed into downstream metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub rounding: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prng: Option<String>,
}

/// Number of training rows: `ceil(n * fraction)`, with products within 1e-9 of
/// an integer taken as that integer.
pub fn train_size(n: usize, fraction: f64) -> usize {
    let exact = n as f64 * fraction;
    let nearest = exact.round();
    if (exact - nearest).abs() <= 1e-9 * exact.abs().max(1.0) {
        nearest as usize
    } else {
        exact.ceil() as usize
    }
}

pub fn split(table: &TimeTable, spec: &SplitSpec) -> Result<(TimeTable, TimeTable, SplitInfo), SplitError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(SplitError::InvalidFraction(spec.train_fraction));
    }
    let target = table
        .column(&spec.target_column)
        .ok_or_else(|| SplitError::MissingTargetColumn(spec.target_column.clone()))?;
    let n = table.rows();
    if target.iter().filter(|v| v.is_some()).count() < 2 {
        return Err(SplitError::TooFewRows(n));
    }
    let n_train = train_size(n, spec.train_fraction);
    if n_train == 0 || n_train >= n {
        return Err(SplitError::TooFewRows(n));
    }

    let (mut train_rows, mut test_rows): (Vec<usize>, Vec<usize>) = match spec.mode {
        SplitMode::Chronological => ((0..n_train).collect(), (n_train..n).collect()),
        SplitMode::Random { seed } => {
            let mut order: Vec<usize> = (0..n).collect();
            rng::fisher_yates(&mut order, &mut rng::seeded(seed));
            let test = order.split_off(n_train);
            (order, test)
        }
    };
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    let info = SplitInfo {
        rows: n,
        train_rows: train_rows.len(),
        test_rows: test_rows.len(),
        rounding: "train = ceil(rows * train_fraction)".into(),
        prng: matches!(spec.mode, SplitMode::Random { .. }).then(|| rng::PRNG_ID.to_string()),
    };
    Ok((table.select_rows(&train_rows), table.select_rows(&test_rows), info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{TimeGrid, TimeIndex, Timestamp};

    fn table(n: usize) -> TimeTable {
        TimeTable::new(
            TimeIndex::Regular(TimeGrid::new(Timestamp(0), 180_000, n).unwrap()),
            vec![("y".into(), (0..n).map(|i| Some(i as f64)).collect())],
        )
        .unwrap()
    }

    fn spec(mode: SplitMode, f: f64) -> SplitSpec {
        SplitSpec { mode, train_fraction: f, target_column: "y".into() }
    }

    #[test]
    fn five_to_one() {
        let (tr, te, info) = split(&table(600), &spec(SplitMode::Chronological, 5.0 / 6.0)).unwrap();
        assert_eq!((tr.rows(), te.rows()), (500, 100));
        assert_eq!(info.train_rows, 500);
        assert!(tr.timestamp(tr.rows() - 1) < te.timestamp(0));
    }

    #[test]
    fn ceil_rounding() {
        assert_eq!(train_size(7, 0.5), 4);
        assert_eq!(train_size(60, 5.0 / 6.0), 50);
        assert_eq!(train_size(10, 0.7), 7);
    }

    #[test]
    fn random_sizes_and_determinism() {
        for seed in 0..20 {
            let (tr, te, _) = split(&table(4), &spec(SplitMode::Random { seed }, 0.5)).unwrap();
            assert_eq!((tr.rows(), te.rows()), (2, 2));
        }
        let a = split(&table(50), &spec(SplitMode::Random { seed: 3 }, 0.7)).unwrap();
        let b = split(&table(50), &spec(SplitMode::Random { seed: 3 }, 0.7)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn errors() {
        assert_eq!(
            split(&table(5), &SplitSpec { target_column: "q".into(), ..spec(SplitMode::Chronological, 0.5) }).unwrap_err(),
            SplitError::MissingTargetColumn("q".into())
        );
        assert_eq!(split(&table(1), &spec(SplitMode::Chronological, 0.5)).unwrap_err(), SplitError::TooFewRows(1));
        assert_eq!(split(&table(2), &spec(SplitMode::Chronological, 0.9)).unwrap_err(), SplitError::TooFewRows(2));
        assert!(matches!(split(&table(5), &spec(SplitMode::Chronological, 1.0)), Err(SplitError::InvalidFraction(_))));
    }
}
