//! Pig in a respiration chamber: a 1 Hz wearable (heat flux, skin
//! temperature, ODBA, heart rate) and chamber heat production every 3 min,
//! with the chamber cycling through 12, 22 and 32 °C phases.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::PathBuf;

use super::{csv, normal, ou, quantize, some, streams, PlantedModel, RawScenario, ScenarioConfig};
use crate::ingest::{MergeSpec, SourceDescriptor, TimestampFormat};
use crate::stats;
use crate::timeseries::{Aggregation, FeatureSpec, GridStrategy, LabelAlignment, Rate};

pub const LABEL_PERIOD_S: u64 = 180;
pub const PHASE_S: u64 = 7200;
pub const TARGET: &str = "chamber.heat";
pub const FEATURES: [&str; 5] = [
    "wearable.heat_flux_mean",
    "wearable.skin_temp_mean",
    "wearable.odba_mean",
    "wearable.heart_rate_mean",
    "chamber.temperature",
];
pub const SOURCE_FILES: [&str; 2] = ["wearable.csv", "chamber.csv"];

/// Skin temperature noise follows a typical ±0.05 °C sensor accuracy.
pub const DEFAULT_NOISE: &[(&str, f64)] = &[
    ("heat_flux", 0.5),
    ("skin_temp", 0.05),
    ("odba", 0.01),
    ("heart_rate", 1.0),
    ("temperature", 0.1),
    ("heat", 4.0),
];

const TEMPERATURES: [f64; 3] = [12.0, 22.0, 32.0];
/// Extra heat (W) below, at and above thermoneutrality.
const THERMAL: [f64; 3] = [60.0, 0.0, 40.0];
const WEARABLE: [&str; 4] = ["heat_flux", "skin_temp", "odba", "heart_rate"];

pub fn default_planted() -> PlantedModel {
    PlantedModel {
        intercept: -120.0,
        coefficients: [
            ("wearable.heat_flux_mean", 1.5),
            ("wearable.skin_temp_mean", 4.0),
            ("wearable.odba_mean", 80.0),
            ("wearable.heart_rate_mean", 0.9),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
    }
}

fn phase(t_s: u64) -> usize {
    ((t_s / PHASE_S) % 3) as usize
}

pub(crate) fn generate(cfg: &ScenarioConfig) -> RawScenario {
    let d = cfg.duration();
    let n = d as usize + 1;
    let noise = cfg.noise();
    let sd = |k: &str| noise[k];
    let (mut sig, mut nz, _) = streams(cfg.seed);

    let ou_hf = ou(&mut sig, n, 900.0, 6.0);
    let ou_st = ou(&mut sig, n, 1200.0, 0.4);
    let ou_od = ou(&mut sig, n, 300.0, 1.0);
    let ou_hr = ou(&mut sig, n, 600.0, 6.0);

    let mut cols: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
    for t in 0..n {
        let ts = t as f64;
        let temp = TEMPERATURES[phase(t as u64)];
        let activity = 0.05 + 0.12 * (0.6 * ou_od[t]).exp();
        cols[0].push(quantize(40.0 + 12.0 * (2.0 * PI * ts / 5400.0 + 0.7).sin() + ou_hf[t] + sd("heat_flux") * normal(&mut nz), 3));
        cols[1].push(quantize(36.5 + 0.06 * (temp - 22.0) + ou_st[t] + sd("skin_temp") * normal(&mut nz), 3));
        cols[2].push(quantize((activity + sd("odba") * normal(&mut nz)).max(0.0), 4));
        cols[3].push(quantize(85.0 + 60.0 * (activity - 0.15) + ou_hr[t] + sd("heart_rate") * normal(&mut nz), 2));
    }

    let planted = cfg.planted_model();
    let thermal_on = cfg.thermal_effect.unwrap_or(true);
    let labels = (d / LABEL_PERIOD_S) as usize;
    let mut stamps = Vec::with_capacity(labels);
    let mut heat = Vec::with_capacity(labels);
    let mut temperature = Vec::with_capacity(labels);
    for k in 1..=labels {
        let end = k * LABEL_PERIOD_S as usize;
        let start = end - LABEL_PERIOD_S as usize;
        let p = phase((end - LABEL_PERIOD_S as usize / 2) as u64);
        let temp = quantize(TEMPERATURES[p] + sd("temperature") * normal(&mut nz), 2);
        let mut features = BTreeMap::new();
        for (j, name) in WEARABLE.iter().enumerate() {
            let m = stats::mean(&cols[j][start..end]).expect("non-empty window");
            features.insert(format!("wearable.{name}_mean"), m);
        }
        features.insert("chamber.temperature".to_string(), temp);
        let mut y = planted.intercept;
        for (name, c) in &planted.coefficients {
            y += c * features[name];
        }
        if thermal_on {
            y += THERMAL[p];
        }
        y += sd("heat") * normal(&mut nz);
        stamps.push(end as i64 * 1000);
        heat.push(y);
        temperature.push(temp);
    }

    let wearable = csv(
        "time_s",
        (0..n).map(|t| t.to_string()).collect(),
        WEARABLE.iter().zip(cols).map(|(name, c)| (*name, some(c))).collect(),
    );
    let chamber = csv(
        "timestamp_ms",
        stamps.iter().map(|t| t.to_string()).collect(),
        vec![("heat", some(heat.clone())), ("temperature", some(temperature))],
    );

    let units = |pairs: &[(&str, &str)]| pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let window = FeatureSpec {
        window_ms: LABEL_PERIOD_S * 1000,
        aggregations: BTreeSet::from([Aggregation::Mean]),
        label_alignment: LabelAlignment::WindowEnd,
    };
    let merge = MergeSpec {
        sources: vec![
            SourceDescriptor {
                path: PathBuf::from("wearable.csv"),
                channel_name: "wearable".into(),
                timestamp_column: "time_s".into(),
                value_columns: WEARABLE.iter().map(|s| s.to_string()).collect(),
                timestamp_format: TimestampFormat::ElapsedS,
                nominal_rate_hz: Rate::hz(1),
                unit: String::new(),
                units: units(&[("heat_flux", "W/m2"), ("skin_temp", "degC"), ("odba", "g"), ("heart_rate", "bpm")]),
            },
            SourceDescriptor {
                path: PathBuf::from("chamber.csv"),
                channel_name: "chamber".into(),
                timestamp_column: "timestamp_ms".into(),
                value_columns: vec!["heat".into(), "temperature".into()],
                timestamp_format: TimestampFormat::EpochMs,
                nominal_rate_hz: Rate::new(1, LABEL_PERIOD_S).expect("valid rate"),
                unit: String::new(),
                units: units(&[("heat", "W"), ("temperature", "degC")]),
            },
        ],
        grid_strategy: GridStrategy::MasterChannel(TARGET.into()),
        default_policy: Default::default(),
        per_channel_policy: BTreeMap::new(),
        feature_specs: WEARABLE.iter().map(|c| (format!("wearable.{c}"), window.clone())).collect(),
        derived: vec![],
        exclude: vec![],
    };

    RawScenario {
        sources: vec![("wearable.csv".into(), wearable), ("chamber.csv".into(), chamber)],
        merge,
        label_timestamps_ms: stamps,
        target_values: heat,
        faults: vec![],
        thermal: thermal_on.then(|| {
            TEMPERATURES.iter().zip(THERMAL).map(|(t, h)| (format!("{t}"), h)).collect()
        }),
    }
}
