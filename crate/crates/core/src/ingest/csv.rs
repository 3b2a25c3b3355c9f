//! The CSV dialect shared by every component: comma separated, `.` decimal
//! point, header row first, UTF-8, MISSING written as an empty field.

use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{IngestError, SourceDescriptor, TimestampFormat};
use crate::timeseries::{RawChannel, Sample, TimeIndex, TimeTable, Timestamp, Value};

/// Name of the first column of every table written by the pipeline.
pub const TIMESTAMP_COLUMN: &str = "timestamp_ms";

/// Row accounting for one parsed source file.
///
/// `good_rows + missing_rows + rejected_rows == physical_rows`, where rejected
/// rows are those with an unparseable timestamp plus earlier duplicates that a
/// later row with the same timestamp replaced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub path: String,
    pub physical_rows: usize,
    pub good_rows: usize,
    pub missing_rows: usize,
    pub rejected_rows: usize,
    pub bad_values: usize,
    pub empty_values: usize,
    pub bad_timestamp_lines: Vec<usize>,
    pub duplicate_timestamp_lines: Vec<usize>,
}

pub fn format_value(v: Value) -> String {
    match v {
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

fn parse_value(field: &str) -> Result<Value, ()> {
    let f = field.trim();
    if f.is_empty() {
        return Ok(None);
    }
    match f.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        _ => Err(()),
    }
}

pub(crate) fn parse_timestamp(field: &str, format: TimestampFormat) -> Option<Timestamp> {
    let f = field.trim();
    if f.is_empty() {
        return None;
    }
    let ms = match format {
        TimestampFormat::EpochMs => match f.parse::<i64>() {
            Ok(v) => v,
            Err(_) => {
                let x = f.parse::<f64>().ok().filter(|x| x.is_finite())?;
                x.round() as i64
            }
        },
        TimestampFormat::EpochS | TimestampFormat::ElapsedS => {
            let x = f.parse::<f64>().ok().filter(|x| x.is_finite())?;
            (x * 1000.0).round() as i64
        }
        TimestampFormat::Iso8601 => {
            if let Ok(dt) = DateTime::parse_from_rfc3339(f) {
                dt.timestamp_millis()
            } else {
                let naive = NaiveDateTime::parse_from_str(f, "%Y-%m-%dT%H:%M:%S%.f")
                    .or_else(|_| NaiveDateTime::parse_from_str(f, "%Y-%m-%d %H:%M:%S%.f"))
                    .ok()?;
                naive.and_utc().timestamp_millis()
            }
        }
    };
    Some(Timestamp(ms))
}

pub(crate) fn format_timestamp(t: Timestamp, format: TimestampFormat) -> String {
    match format {
        TimestampFormat::EpochMs => t.0.to_string(),
        TimestampFormat::EpochS | TimestampFormat::ElapsedS => {
            let sign = if t.0 < 0 { "-" } else { "" };
            let abs = t.0.unsigned_abs();
            let (s, ms) = (abs / 1000, abs % 1000);
            if ms == 0 {
                format!("{sign}{s}")
            } else {
                let frac = format!("{ms:03}");
                format!("{sign}{s}.{}", frac.trim_end_matches('0'))
            }
        }
        TimestampFormat::Iso8601 => DateTime::from_timestamp_millis(t.0)
            .map(|d| d.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string())
            .unwrap_or_else(|| t.0.to_string()),
    }
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::None).from_reader(bytes)
}

/// Reads one sensor file into a channel per value column.
pub fn parse_csv(path: &Path, descriptor: &SourceDescriptor) -> Result<(Vec<RawChannel>, ParseReport), IngestError> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.display().to_string()),
        _ => IngestError::Io { path: path.display().to_string(), message: e.to_string() },
    })?;
    parse_csv_bytes(&bytes, descriptor, &path.display().to_string())
}

pub fn parse_csv_bytes(
    bytes: &[u8],
    descriptor: &SourceDescriptor,
    label: &str,
) -> Result<(Vec<RawChannel>, ParseReport), IngestError> {
    let mut rdr = reader(bytes);
    let headers = match rdr.headers() {
        Ok(h) if !(h.is_empty() || (h.len() == 1 && h[0].trim().is_empty())) => h.clone(),
        Ok(_) => return Err(IngestError::EmptyFile(label.to_string())),
        Err(e) => return Err(IngestError::Csv { path: label.to_string(), message: e.to_string() }),
    };
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn { path: label.to_string(), column: name.to_string() })
    };
    let ts_idx = col(&descriptor.timestamp_column)?;
    let value_idx = descriptor.value_columns.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;

    let mut report = ParseReport { path: label.to_string(), ..Default::default() };
    // (timestamp, line, values)
    let mut rows: Vec<(Timestamp, usize, Vec<Value>)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| IngestError::Csv { path: label.to_string(), message: e.to_string() })?;
        report.physical_rows += 1;
        let Some(t) = record.get(ts_idx).and_then(|f| parse_timestamp(f, descriptor.timestamp_format)) else {
            report.bad_timestamp_lines.push(line);
            continue;
        };
        let values = value_idx
            .iter()
            .map(|&j| {
                let field = record.get(j).unwrap_or("");
                match parse_value(field) {
                    Ok(None) => {
                        report.empty_values += 1;
                        None
                    }
                    Ok(v) => v,
                    Err(()) => {
                        report.bad_values += 1;
                        None
                    }
                }
            })
            .collect();
        rows.push((t, line, values));
    }
    if report.physical_rows == 0 {
        return Err(IngestError::EmptyFile(label.to_string()));
    }

    // stable sort keeps file order among equal timestamps; the last one wins
    rows.sort_by_key(|r| r.0);
    let mut kept: Vec<(Timestamp, Vec<Value>)> = Vec::with_capacity(rows.len());
    for (i, (t, line, values)) in rows.iter().enumerate() {
        if rows.get(i + 1).is_some_and(|next| next.0 == *t) {
            report.duplicate_timestamp_lines.push(*line);
            continue;
        }
        kept.push((*t, values.clone()));
    }
    report.duplicate_timestamp_lines.sort_unstable();
    report.rejected_rows = report.bad_timestamp_lines.len() + report.duplicate_timestamp_lines.len();
    for (_, values) in &kept {
        if values.iter().all(Option::is_some) {
            report.good_rows += 1;
        } else {
            report.missing_rows += 1;
        }
    }

    let channels = descriptor
        .value_columns
        .iter()
        .enumerate()
        .map(|(k, column)| {
            let samples = kept.iter().map(|(t, v)| Sample { t: *t, value: v[k] }).collect();
            RawChannel::new(
                descriptor.qualified_name(column),
                descriptor.unit_of(column),
                descriptor.nominal_rate_hz,
                samples,
            )
            .map_err(IngestError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((channels, report))
}

/// Writes channels parsed from one descriptor back in that descriptor's
/// layout. Channels must share timestamps (as `parse_csv` produces them).
pub fn serialize_channels(descriptor: &SourceDescriptor, channels: &[RawChannel]) -> Result<Vec<u8>, IngestError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec![descriptor.timestamp_column.clone()];
    header.extend(descriptor.value_columns.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let Some(first) = channels.first() else {
        return finish(w);
    };
    for (i, s) in first.samples().iter().enumerate() {
        let mut row = vec![format_timestamp(s.t, descriptor.timestamp_format)];
        for c in channels {
            row.push(format_value(c.samples()[i].value));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Serializes a table: `timestamp_ms` first, then columns in table order.
pub fn write_table_csv(table: &TimeTable) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec![TIMESTAMP_COLUMN.to_string()];
    header.extend(table.names().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    let cols: Vec<&[Value]> = table.columns().map(|(_, c)| c).collect();
    for r in 0..table.rows() {
        let mut row = Vec::with_capacity(cols.len() + 1);
        row.push(table.timestamp(r).0.to_string());
        row.extend(cols.iter().map(|c| format_value(c[r])));
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Parses a table written by [`write_table_csv`]. Evenly spaced timestamps
/// give a regular grid; anything else an explicit index.
pub fn read_table_csv(bytes: &[u8], label: &str) -> Result<TimeTable, IngestError> {
    let mut rdr = reader(bytes);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Csv { path: label.to_string(), message: e.to_string() })?
        .clone();
    if headers.get(0) != Some(TIMESTAMP_COLUMN) {
        return Err(IngestError::MissingColumn { path: label.to_string(), column: TIMESTAMP_COLUMN.into() });
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut columns: Vec<Vec<Value>> = vec![Vec::new(); names.len()];
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| IngestError::Csv { path: label.to_string(), message: e.to_string() })?;
        if record.len() != names.len() + 1 {
            return Err(IngestError::Csv {
                path: label.to_string(),
                message: format!("line {line}: expected {} fields, found {}", names.len() + 1, record.len()),
            });
        }
        let t = record[0].parse::<i64>().map_err(|_| IngestError::Csv {
            path: label.to_string(),
            message: format!("line {line}: bad timestamp `{}`", &record[0]),
        })?;
        timestamps.push(Timestamp(t));
        for (j, col) in columns.iter_mut().enumerate() {
            let v = parse_value(&record[j + 1]).map_err(|()| IngestError::Csv {
                path: label.to_string(),
                message: format!("line {line}: bad value `{}` in column `{}`", &record[j + 1], names[j]),
            })?;
            col.push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(IngestError::EmptyFile(label.to_string()));
    }
    Ok(TimeTable::new(TimeIndex::from_timestamps(timestamps), names.into_iter().zip(columns).collect())?)
}

pub fn read_table(path: &Path) -> Result<TimeTable, IngestError> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.display().to_string()),
        _ => IngestError::Io { path: path.display().to_string(), message: e.to_string() },
    })?;
    read_table_csv(&bytes, &path.display().to_string())
}

/// Writes raw columns with preformatted timestamps; used by the generators.
pub fn write_raw_csv(timestamp_header: &str, timestamps: &[String], columns: &[(String, Vec<Value>)]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec![timestamp_header.to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).expect("in-memory write");
    for (i, t) in timestamps.iter().enumerate() {
        let mut row = vec![t.clone()];
        row.extend(columns.iter().map(|(_, c)| format_value(c[i])));
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn csv_err(e: csv::Error) -> IngestError {
    IngestError::Csv { path: String::new(), message: e.to_string() }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, IngestError> {
    w.into_inner().map_err(|e| IngestError::Csv { path: String::new(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::Rate;

    fn desc(format: TimestampFormat, cols: &[&str]) -> SourceDescriptor {
        SourceDescriptor {
            path: "x.csv".into(),
            channel_name: "s".into(),
            timestamp_column: "t".into(),
            value_columns: cols.iter().map(|c| c.to_string()).collect(),
            timestamp_format: format,
            nominal_rate_hz: Rate::hz(1),
            unit: "u".into(),
            units: Default::default(),
        }
    }

    #[test]
    fn two_rows_epoch_ms() {
        let (ch, rep) = parse_csv_bytes(b"t,hf\n0,1.5\n1000,2.5\n", &desc(TimestampFormat::EpochMs, &["hf"]), "x").unwrap();
        assert_eq!(ch.len(), 1);
        assert_eq!(ch[0].name(), "s.hf");
        assert_eq!(ch[0].len(), 2);
        assert_eq!(rep.good_rows, 2);
    }

    #[test]
    fn bad_value_becomes_missing() {
        let (ch, rep) =
            parse_csv_bytes(b"t,hf\n0,1.5\n1000,2.5\n2000,abc\n", &desc(TimestampFormat::EpochMs, &["hf"]), "x").unwrap();
        assert_eq!(ch[0].samples()[2].value, None);
        assert_eq!(ch[0].samples()[2].t, Timestamp(2000));
        assert_eq!(rep.bad_values, 1);
        assert_eq!(rep.missing_rows, 1);
    }

    #[test]
    fn elapsed_seconds_minutes() {
        let (ch, _) = parse_csv_bytes(b"t,v\n0,1\n60,2\n120,3\n", &desc(TimestampFormat::ElapsedS, &["v"]), "x").unwrap();
        let ts: Vec<i64> = ch[0].timestamps().map(|t| t.0).collect();
        assert_eq!(ts, vec![0, 60_000, 120_000]);
    }

    #[test]
    fn rejected_and_duplicates_accounted() {
        let data = b"t,v\n0,1\nxx,2\n1000,3\n1000,4\n500,\n";
        let (ch, rep) = parse_csv_bytes(data, &desc(TimestampFormat::EpochMs, &["v"]), "x").unwrap();
        assert_eq!(rep.physical_rows, 5);
        assert_eq!(rep.bad_timestamp_lines, vec![3]);
        assert_eq!(rep.duplicate_timestamp_lines, vec![4]);
        assert_eq!(rep.good_rows + rep.missing_rows + rep.rejected_rows, rep.physical_rows);
        let vals: Vec<Value> = ch[0].values().collect();
        assert_eq!(vals, vec![Some(1.0), None, Some(4.0)]);
    }

    #[test]
    fn header_errors() {
        let d = desc(TimestampFormat::EpochMs, &["hf"]);
        assert!(matches!(parse_csv_bytes(b"", &d, "x"), Err(IngestError::EmptyFile(_))));
        assert!(matches!(parse_csv_bytes(b"t,hf\n", &d, "x"), Err(IngestError::EmptyFile(_))));
        assert!(matches!(parse_csv_bytes(b"t,zz\n0,1\n", &d, "x"), Err(IngestError::MissingColumn { .. })));
        assert!(matches!(
            parse_csv(Path::new("/nonexistent/file.csv"), &d),
            Err(IngestError::FileNotFound(_))
        ));
    }

    #[test]
    fn iso_timestamps() {
        let t = parse_timestamp("1970-01-01T00:00:01.250Z", TimestampFormat::Iso8601).unwrap();
        assert_eq!(t, Timestamp(1250));
        let t = parse_timestamp("1970-01-01 00:01:00", TimestampFormat::Iso8601).unwrap();
        assert_eq!(t, Timestamp(60_000));
        assert_eq!(format_timestamp(Timestamp(1250), TimestampFormat::Iso8601), "1970-01-01T00:00:01.250Z");
        assert_eq!(format_timestamp(Timestamp(40), TimestampFormat::ElapsedS), "0.04");
        assert_eq!(format_timestamp(Timestamp(-1500), TimestampFormat::EpochS), "-1.5");
    }

    #[test]
    fn table_roundtrip_keeps_missing() {
        let table = TimeTable::new(
            TimeIndex::from_timestamps(vec![Timestamp(0), Timestamp(10), Timestamp(25)]),
            vec![("a".into(), vec![Some(0.1), None, Some(-3.25e-7)])],
        )
        .unwrap();
        let bytes = write_table_csv(&table);
        assert_eq!(String::from_utf8(bytes.clone()).unwrap(), "timestamp_ms,a\n0,0.1\n10,\n25,-0.000000325\n");
        assert_eq!(read_table_csv(&bytes, "t").unwrap(), table);
    }
}
