use serde::{Deserialize, Serialize};

use super::{ModelArtifact, ModelError, Prediction};
use crate::ingest::{format_value, TIMESTAMP_COLUMN};
use crate::timeseries::{TimeTable, Value};

const HEADER: [&str; 4] = [TIMESTAMP_COLUMN, "actual", "predicted", "usable"];

/// The predictions file: one row per input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub timestamp_ms: Vec<i64>,
    pub actual: Vec<Value>,
    pub predicted: Vec<Value>,
    pub usable: Vec<bool>,
}

impl PredictionTable {
    /// Pairs predictions with the table's target column, when it has one.
    pub fn new(model: &ModelArtifact, table: &TimeTable, prediction: Prediction) -> Self {
        let actual = match table.column(&model.spec.target) {
            Some(c) => c.to_vec(),
            None => vec![None; table.rows()],
        };
        PredictionTable {
            timestamp_ms: table.timestamps().iter().map(|t| t.0).collect(),
            actual,
            predicted: prediction.values,
            usable: prediction.usable,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamp_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamp_ms.is_empty()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(HEADER).expect("in-memory write");
        for i in 0..self.len() {
            w.write_record([
                self.timestamp_ms[i].to_string(),
                format_value(self.actual[i]),
                format_value(self.predicted[i]),
                self.usable[i].to_string(),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    pub fn from_csv(bytes: &[u8], label: &str) -> Result<Self, ModelError> {
        let bad = |m: String| ModelError::Io { path: label.to_string(), message: m };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(bad(format!("expected header {}", HEADER.join(","))));
        }
        let mut t = PredictionTable { timestamp_ms: vec![], actual: vec![], predicted: vec![], usable: vec![] };
        let value = |s: &str, line: usize| -> Result<Value, ModelError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| bad(format!("line {line}: bad number `{s}`")))
            }
        };
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            t.timestamp_ms.push(rec[0].parse().map_err(|_| bad(format!("line {line}: bad timestamp")))?);
            t.actual.push(value(&rec[1], line)?);
            t.predicted.push(value(&rec[2], line)?);
            t.usable.push(rec[3].parse().map_err(|_| bad(format!("line {line}: bad usable flag")))?);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t = PredictionTable {
            timestamp_ms: vec![0, 180_000],
            actual: vec![Some(1.25), None],
            predicted: vec![Some(0.1 + 0.2), None],
            usable: vec![true, false],
        };
        let bytes = t.to_csv();
        assert!(String::from_utf8(bytes.clone()).unwrap().starts_with("timestamp_ms,actual,predicted,usable\n0,1.25,"));
        assert_eq!(PredictionTable::from_csv(&bytes, "p").unwrap(), t);
        assert!(PredictionTable::from_csv(b"a,b\n1,2\n", "p").is_err());
    }
}
