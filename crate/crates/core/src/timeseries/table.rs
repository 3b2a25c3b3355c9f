use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{TimeGrid, TimeSeriesError, Timestamp, Value};

/// Row index of a table: a regular grid, or explicit timestamps when rows have
/// been dropped or subset (as after `drop_row` or a random split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeIndex {
    Regular(TimeGrid),
    Irregular(Vec<Timestamp>),
}

impl TimeIndex {
    pub fn len(&self) -> usize {
        match self {
            TimeIndex::Regular(g) => g.count,
            TimeIndex::Irregular(ts) => ts.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Timestamp {
        match self {
            TimeIndex::Regular(g) => g.point(i),
            TimeIndex::Irregular(ts) => ts[i],
        }
    }

    /// Builds the most specific index for `timestamps`: a grid when they are
    /// evenly spaced (and there are at least two), explicit otherwise.
    pub fn from_timestamps(timestamps: Vec<Timestamp>) -> Self {
        if timestamps.len() >= 2 {
            let step = timestamps[1].0 - timestamps[0].0;
            if step > 0 && timestamps.windows(2).all(|w| w[1].0 - w[0].0 == step) {
                return TimeIndex::Regular(TimeGrid {
                    start: timestamps[0],
                    period_ms: step as u64,
                    count: timestamps.len(),
                });
            }
        }
        TimeIndex::Irregular(timestamps)
    }
}

/// A rectangular table of named channels sharing one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTable {
    index: TimeIndex,
    names: Vec<String>,
    columns: Vec<Vec<Value>>,
    units: BTreeMap<String, String>,
}

impl TimeTable {
    /// Checks rectangularity, unique non-empty names and, for explicit
    /// indexes, strictly increasing timestamps.
    pub fn new(index: TimeIndex, columns: Vec<(String, Vec<Value>)>) -> Result<Self, TimeSeriesError> {
        if let TimeIndex::Irregular(ts) = &index {
            if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0]) {
                return Err(TimeSeriesError::NonmonotonicTimestamps {
                    channel: "timestamp".into(),
                    index: i + 1,
                });
            }
        }
        let expected = index.len();
        let mut seen = HashSet::new();
        let mut names = Vec::with_capacity(columns.len());
        let mut data = Vec::with_capacity(columns.len());
        for (name, values) in columns {
            if name.is_empty() {
                return Err(TimeSeriesError::EmptyColumnName);
            }
            if !seen.insert(name.clone()) {
                return Err(TimeSeriesError::DuplicateColumn(name));
            }
            if values.len() != expected {
                return Err(TimeSeriesError::NotRectangular { column: name, len: values.len(), expected });
            }
            names.push(name);
            data.push(values);
        }
        Ok(Self { index, names, columns: data, units: BTreeMap::new() })
    }

    pub fn with_units(mut self, units: BTreeMap<String, String>) -> Self {
        self.units = units;
        self
    }

    pub fn units(&self) -> &BTreeMap<String, String> {
        &self.units
    }

    pub fn unit(&self, column: &str) -> Option<&str> {
        self.units.get(column).map(String::as_str)
    }

    pub fn index(&self) -> &TimeIndex {
        &self.index
    }

    pub fn grid(&self) -> Option<&TimeGrid> {
        match &self.index {
            TimeIndex::Regular(g) => Some(g),
            TimeIndex::Irregular(_) => None,
        }
    }

    pub fn is_regular(&self) -> bool {
        matches!(self.index, TimeIndex::Regular(_))
    }

    pub fn rows(&self) -> usize {
        self.index.len()
    }

    pub fn timestamp(&self, row: usize) -> Timestamp {
        self.index.get(row)
    }

    pub fn timestamps(&self) -> Vec<Timestamp> {
        (0..self.rows()).map(|i| self.index.get(i)).collect()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[Value]> {
        self.position(name).map(|i| self.columns[i].as_slice())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[Value])> {
        self.names.iter().map(String::as_str).zip(self.columns.iter().map(Vec::as_slice))
    }

    pub fn cell(&self, row: usize, col: usize) -> Value {
        self.columns[col][row]
    }

    /// Replaces a column's values; the length must match.
    pub fn replace_column(&mut self, name: &str, values: Vec<Value>) -> Result<(), TimeSeriesError> {
        let expected = self.rows();
        let i = self
            .position(name)
            .ok_or_else(|| TimeSeriesError::InvalidGrid(format!("no column `{name}`")))?;
        if values.len() != expected {
            return Err(TimeSeriesError::NotRectangular { column: name.into(), len: values.len(), expected });
        }
        self.columns[i] = values;
        Ok(())
    }

    /// Keeps the given rows (ascending), re-deriving the index.
    pub fn select_rows(&self, rows: &[usize]) -> TimeTable {
        let ts: Vec<Timestamp> = rows.iter().map(|&r| self.index.get(r)).collect();
        let index = match (&self.index, rows) {
            // a contiguous slice of a grid stays a grid
            (TimeIndex::Regular(g), [first, ..])
                if rows.windows(2).all(|w| w[1] == w[0] + 1) =>
            {
                TimeIndex::Regular(TimeGrid { start: g.point(*first), period_ms: g.period_ms, count: rows.len() })
            }
            _ => TimeIndex::Irregular(ts),
        };
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        TimeTable { index, names: self.names.clone(), columns, units: self.units.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeIndex {
        TimeIndex::Regular(TimeGrid::new(Timestamp(0), 1000, n).unwrap())
    }

    #[test]
    fn rejects_ragged_and_duplicate() {
        let r = TimeTable::new(grid(2), vec![("a".into(), vec![Some(1.0)])]);
        assert!(matches!(r, Err(TimeSeriesError::NotRectangular { .. })));
        let r = TimeTable::new(
            grid(1),
            vec![("a".into(), vec![Some(1.0)]), ("a".into(), vec![None])],
        );
        assert!(matches!(r, Err(TimeSeriesError::DuplicateColumn(_))));
        let r = TimeTable::new(grid(1), vec![(String::new(), vec![None])]);
        assert!(matches!(r, Err(TimeSeriesError::EmptyColumnName)));
    }

    #[test]
    fn index_detection() {
        let ts = vec![Timestamp(0), Timestamp(10), Timestamp(20)];
        assert!(matches!(TimeIndex::from_timestamps(ts), TimeIndex::Regular(_)));
        let ts = vec![Timestamp(0), Timestamp(10), Timestamp(30)];
        assert!(matches!(TimeIndex::from_timestamps(ts), TimeIndex::Irregular(_)));
    }

    #[test]
    fn select_keeps_grid_when_contiguous() {
        let t = TimeTable::new(grid(4), vec![("a".into(), vec![Some(0.0), Some(1.0), Some(2.0), Some(3.0)])])
            .unwrap();
        let s = t.select_rows(&[1, 2]);
        assert!(s.is_regular());
        assert_eq!(s.timestamp(0), Timestamp(1000));
        let s = t.select_rows(&[0, 3]);
        assert!(!s.is_regular());
        assert_eq!(s.column("a").unwrap(), &[Some(0.0), Some(3.0)]);
    }
}
