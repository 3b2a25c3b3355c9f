use serde::{Deserialize, Serialize};

use super::{MissingPolicy, QualityError, QualitySpec};
use crate::timeseries::{TimeTable, Timestamp, Value};

/// A run of consecutive MISSING cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub start_row: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MissingOutcome {
    /// Cells filled per column (table column order).
    pub filled: Vec<usize>,
    /// Gaps left in place per column.
    pub unfilled: Vec<Vec<Gap>>,
    pub rows_dropped: usize,
}

fn gaps(values: &[Value]) -> Vec<Gap> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i].is_none() {
            let start = i;
            while i < values.len() && values[i].is_none() {
                i += 1;
            }
            out.push(Gap { start_row: start, len: i - start });
        } else {
            i += 1;
        }
    }
    out
}

fn interpolate(values: &mut [Value], ts: &[Timestamp], max_gap: usize, carry_only: bool) -> (usize, Vec<Gap>) {
    let mut filled = 0;
    let mut left = Vec::new();
    for g in gaps(values) {
        let end = g.start_row + g.len;
        let before = g.start_row.checked_sub(1).and_then(|i| values[i].map(|v| (i, v)));
        let after = values.get(end).copied().flatten().map(|v| (end, v));
        let fill = match (before, after) {
            (Some((_, a)), _) if carry_only && g.len <= max_gap => Some((a, None)),
            (Some(a), Some(b)) if !carry_only && g.len <= max_gap => Some((a.1, Some((a.0, b)))),
            _ => None,
        };
        let Some((a, towards)) = fill else {
            left.push(g);
            continue;
        };
        for i in g.start_row..end {
            values[i] = Some(match towards {
                None => a,
                Some((ia, (ib, b))) => {
                    let (ta, tb) = (ts[ia].0, ts[ib].0);
                    let frac = (ts[i].0 - ta) as f64 / (tb - ta) as f64;
                    (a + frac * (b - a)).clamp(a.min(b), a.max(b))
                }
            });
            filled += 1;
        }
    }
    (filled, left)
}

/// Applies the missing-data policy. Only MISSING cells change; the index is
/// preserved except under `drop_row`.
pub fn handle_missing(table: &TimeTable, spec: &QualitySpec) -> Result<(TimeTable, MissingOutcome), QualityError> {
    let ncols = table.names().len();
    match spec.missing_policy {
        MissingPolicy::Fail => {
            for r in 0..table.rows() {
                for (name, col) in table.columns() {
                    if col[r].is_none() {
                        return Err(QualityError::MissingDataFound {
                            column: name.to_string(),
                            timestamp_ms: table.timestamp(r).0,
                        });
                    }
                }
            }
            Ok((table.clone(), MissingOutcome { filled: vec![0; ncols], unfilled: vec![vec![]; ncols], rows_dropped: 0 }))
        }
        MissingPolicy::DropRow => {
            let keep: Vec<usize> =
                (0..table.rows()).filter(|&r| table.columns().all(|(_, c)| c[r].is_some())).collect();
            let dropped = table.rows() - keep.len();
            let out = if dropped == 0 { table.clone() } else { table.select_rows(&keep) };
            Ok((out, MissingOutcome { filled: vec![0; ncols], unfilled: vec![vec![]; ncols], rows_dropped: dropped }))
        }
        MissingPolicy::LinearInterpolate { max_gap_cells } | MissingPolicy::ForwardFill { max_gap_cells } => {
            let carry = matches!(spec.missing_policy, MissingPolicy::ForwardFill { .. });
            let ts = table.timestamps();
            let mut out = table.clone();
            let mut outcome = MissingOutcome::default();
            for (name, col) in table.columns() {
                if !col.is_empty() && col.iter().all(Option::is_none) {
                    return Err(QualityError::AllMissingColumn(name.to_string()));
                }
                let mut values = col.to_vec();
                let (filled, left) = interpolate(&mut values, &ts, max_gap_cells, carry);
                outcome.filled.push(filled);
                outcome.unfilled.push(left);
                if filled > 0 {
                    out.replace_column(name, values)?;
                }
            }
            Ok((out, outcome))
        }
    }
}
