//! Mussel exposure trial: shell opening, dissolved oxygen and heart rate
//! logged once a minute, with heart rate planted as a linear function of the
//! other two and optional missing cells and spikes injected afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::Rng;

use super::{csv, normal, ou, quantize, streams, FaultKind, FaultRecord, PlantedModel, RawScenario, ScenarioConfig};
use crate::ingest::{MergeSpec, SourceDescriptor, TimestampFormat};
use crate::stats;
use crate::timeseries::{GridStrategy, Rate};

pub const PERIOD_S: u64 = 60;
pub const SHELL_COLUMN: &str = "mussel.shell_opening";
pub const TARGET: &str = "mussel.heart_rate";
pub const FEATURES: [&str; 2] = ["mussel.shell_opening", "mussel.do"];
pub const SOURCE_FILES: [&str; 1] = ["mussel.csv"];

pub const DEFAULT_NOISE: &[(&str, f64)] = &[("shell_opening", 0.05), ("do", 0.05), ("heart_rate", 0.5)];

const COLUMNS: [&str; 3] = ["shell_opening", "do", "heart_rate"];

pub fn default_planted() -> PlantedModel {
    PlantedModel {
        intercept: 5.0,
        coefficients: BTreeMap::from([("mussel.shell_opening".to_string(), 2.0), ("mussel.do".to_string(), 1.5)]),
    }
}

pub(crate) fn generate(cfg: &ScenarioConfig) -> RawScenario {
    let n = (cfg.duration() / PERIOD_S) as usize;
    let noise = cfg.noise();
    let (mut sig, mut nz, mut fault_rng) = streams(cfg.seed);

    let shell_ou = ou(&mut sig, n, 10.0, 1.5);
    let do_ou = ou(&mut sig, n, 15.0, 0.6);
    let shell: Vec<f64> =
        shell_ou.iter().map(|v| quantize(6.0 + v + noise["shell_opening"] * normal(&mut nz), 3)).collect();
    let oxygen: Vec<f64> = do_ou.iter().map(|v| quantize(7.5 + v + noise["do"] * normal(&mut nz), 3)).collect();

    let planted = cfg.planted_model();
    let coef = |k: &str| planted.coefficients.get(k).copied().unwrap_or(0.0);
    let heart: Vec<f64> = (0..n)
        .map(|i| {
            let clean = planted.intercept + coef(FEATURES[0]) * shell[i] + coef(FEATURES[1]) * oxygen[i];
            quantize(clean + noise["heart_rate"] * normal(&mut nz), 3)
        })
        .collect();

    let mut columns: Vec<Vec<Option<f64>>> =
        [&shell, &oxygen, &heart].iter().map(|c| c.iter().copied().map(Some).collect()).collect();

    let f = cfg.fault_config();
    let mut faults = Vec::new();
    let mut used = BTreeSet::new();
    let total = f.missing + f.spikes;
    // never more faults than cells
    let total = total.min(n * COLUMNS.len());
    while used.len() < total {
        let cell = (fault_rng.random_range(0..COLUMNS.len()), fault_rng.random_range(0..n));
        if !used.insert(cell) {
            continue;
        }
        let (col, row) = cell;
        let kind = if used.len() <= f.missing.min(total) { FaultKind::Missing } else { FaultKind::Spike };
        let value = match kind {
            FaultKind::Missing => None,
            FaultKind::Spike => {
                let clean: Vec<f64> = [&shell, &oxygen, &heart][col].clone();
                let m = stats::mean(&clean).expect("non-empty");
                let sd = stats::sample_std(&clean).unwrap_or(0.0).max(1e-3);
                Some(quantize(m + f.spike_sd * sd, 3))
            }
        };
        columns[col][row] = value;
        faults.push(FaultRecord {
            kind,
            column: format!("mussel.{}", COLUMNS[col]),
            row,
            timestamp_ms: row as i64 * PERIOD_S as i64 * 1000,
            value,
        });
    }
    faults.sort_by(|a, b| (a.row, &a.column).cmp(&(b.row, &b.column)));

    let file = csv(
        "time_s",
        (0..n).map(|i| (i as u64 * PERIOD_S).to_string()).collect(),
        COLUMNS.iter().zip(columns).map(|(name, c)| (*name, c)).collect(),
    );

    let merge = MergeSpec {
        sources: vec![SourceDescriptor {
            path: PathBuf::from("mussel.csv"),
            channel_name: "mussel".into(),
            timestamp_column: "time_s".into(),
            value_columns: COLUMNS.iter().map(|s| s.to_string()).collect(),
            timestamp_format: TimestampFormat::ElapsedS,
            nominal_rate_hz: Rate::new(1, PERIOD_S).expect("valid rate"),
            unit: String::new(),
            units: [("shell_opening", "mm"), ("do", "mg/L"), ("heart_rate", "bpm")]
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }],
        grid_strategy: GridStrategy::MasterChannel(SHELL_COLUMN.into()),
        default_policy: Default::default(),
        per_channel_policy: BTreeMap::new(),
        feature_specs: BTreeMap::new(),
        derived: vec![],
        exclude: vec![],
    };

    RawScenario {
        sources: vec![("mussel.csv".into(), file)],
        merge,
        label_timestamps_ms: (0..n).map(|i| i as i64 * PERIOD_S as i64 * 1000).collect(),
        target_values: heart,
        faults,
        thermal: None,
    }
}
