//! Salmon in a closed respirometer: 25 Hz tri-axial acceleration and 1 Hz
//! dissolved oxygen, with oxygen uptake over each 40 s window planted as a
//! linear function of the window's mean ODBA.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;

use super::{csv, normal, quantize, some, streams, PlantedModel, RawScenario, ScenarioConfig};
use crate::ingest::{DerivedChannel, MergeSpec, SourceDescriptor, TimestampFormat};
use crate::sensors::{self, TriAxialAccel, DEFAULT_STATIC_WINDOW_MS};
use crate::stats;
use crate::timeseries::{GridStrategy, Rate, RawChannel, Timestamp};

pub const WINDOW_S: u64 = 40;
pub const ACCEL_HZ: u64 = 25;
pub const TARGET: &str = "mo2";
pub const FEATURES: [&str; 1] = ["odba"];
pub const SOURCE_FILES: [&str; 2] = ["accel.csv", "oxygen.csv"];
pub const VOLUME_L: f64 = 50.0;
pub const MASS_KG: f64 = 1.2;

pub const DEFAULT_NOISE: &[(&str, f64)] = &[("accel", 0.05), ("do", 0.002)];

pub fn default_planted() -> PlantedModel {
    PlantedModel { intercept: 180.0, coefficients: BTreeMap::from([("odba".to_string(), 60.0)]) }
}

pub(crate) fn generate(cfg: &ScenarioConfig) -> RawScenario {
    let d = cfg.duration();
    let noise = cfg.noise();
    let (mut sig, mut nz, _) = streams(cfg.seed);
    let windows = d.div_ceil(WINDOW_S) as usize;
    let activity: Vec<f64> = (0..windows).map(|_| 0.3 + 1.7 * sig.random::<f64>()).collect();

    let n = (d * ACCEL_HZ) as usize;
    let mut axes: [Vec<f64>; 3] = Default::default();
    let mut phase = 0.0f64;
    for i in 0..n {
        let t = i as f64 / ACCEL_HZ as f64;
        let a = activity[(t as u64 / WINDOW_S) as usize];
        phase += 2.0 * PI * (1.5 + 0.5 * a) / ACCEL_HZ as f64;
        let sd = noise["accel"];
        axes[0].push(quantize(a * phase.sin() + sd * normal(&mut nz), 5));
        axes[1].push(quantize(0.4 * a * (phase + 1.1).sin() + sd * normal(&mut nz), 5));
        axes[2].push(quantize(9.81 + 0.25 * a * (2.0 * phase).sin() + sd * normal(&mut nz), 5));
    }

    // ODBA exactly as the merge step will compute it, averaged per window.
    let rate = Rate::hz(ACCEL_HZ);
    let ch = |name: &str, v: &[f64]| RawChannel::regular(name, "m/s2", rate, Timestamp(0), v);
    let accel = TriAxialAccel::new(ch("x", &axes[0]), ch("y", &axes[1]), ch("z", &axes[2])).expect("shared timestamps");
    let odba = sensors::odba(&accel, DEFAULT_STATIC_WINDOW_MS).expect("valid window");
    let per_window = (WINDOW_S * ACCEL_HZ) as usize;
    let odba_values: Vec<f64> = odba.values().map(|v| v.expect("complete axes")).collect();

    let planted = cfg.planted_model();
    let coef = planted.coefficients.get("odba").copied().unwrap_or(0.0);
    let mut mo2 = Vec::with_capacity(windows);
    for k in 0..windows {
        let cell = &odba_values[k * per_window..((k + 1) * per_window).min(n)];
        mo2.push(planted.intercept + coef * stats::mean(cell).expect("non-empty"));
    }

    // Dissolved oxygen falls linearly inside each window at the rate that
    // gives the planted uptake.
    let mut level = 9.5;
    let mut oxygen = Vec::with_capacity(d as usize);
    for k in 0..windows {
        let slope_per_s = -mo2[k] * MASS_KG / (VOLUME_L * 3600.0);
        let start = k as u64 * WINDOW_S;
        for t in start..(start + WINDOW_S).min(d) {
            oxygen.push(level + slope_per_s * (t - start) as f64 + noise["do"] * normal(&mut nz));
        }
        level += slope_per_s * WINDOW_S as f64;
    }

    let accel_csv = csv(
        "timestamp_ms",
        (0..n).map(|i| (i as u64 * 1000 / ACCEL_HZ).to_string()).collect(),
        vec![("x", some(axes[0].clone())), ("y", some(axes[1].clone())), ("z", some(axes[2].clone()))],
    );
    let oxygen_csv = csv("time_s", (0..d).map(|t| t.to_string()).collect(), vec![("do", some(oxygen))]);

    // grid: 40 s cells from 0 up to the last oxygen sample
    let cells = ((d - 1) / WINDOW_S + 1) as usize;
    let merge = MergeSpec {
        sources: vec![
            SourceDescriptor {
                path: PathBuf::from("accel.csv"),
                channel_name: "accel".into(),
                timestamp_column: "timestamp_ms".into(),
                value_columns: vec!["x".into(), "y".into(), "z".into()],
                timestamp_format: TimestampFormat::EpochMs,
                nominal_rate_hz: rate,
                unit: "m/s2".into(),
                units: BTreeMap::new(),
            },
            SourceDescriptor {
                path: PathBuf::from("oxygen.csv"),
                channel_name: "oxygen".into(),
                timestamp_column: "time_s".into(),
                value_columns: vec!["do".into()],
                timestamp_format: TimestampFormat::EpochS,
                nominal_rate_hz: Rate::hz(1),
                unit: "mg/L".into(),
                units: BTreeMap::new(),
            },
        ],
        grid_strategy: GridStrategy::Explicit { period_ms: WINDOW_S * 1000 },
        default_policy: Default::default(),
        per_channel_policy: BTreeMap::new(),
        feature_specs: BTreeMap::new(),
        derived: vec![
            DerivedChannel::Odba {
                name: "odba".into(),
                x: "accel.x".into(),
                y: "accel.y".into(),
                z: "accel.z".into(),
                static_window_ms: DEFAULT_STATIC_WINDOW_MS,
            },
            DerivedChannel::OxygenUptake {
                name: "mo2".into(),
                dissolved_oxygen: "oxygen.do".into(),
                volume_liters: VOLUME_L,
                mass_kg: MASS_KG,
                slope_window_ms: WINDOW_S * 1000,
            },
        ],
        exclude: vec!["accel.x".into(), "accel.y".into(), "accel.z".into()],
    };

    RawScenario {
        sources: vec![("accel.csv".into(), accel_csv), ("oxygen.csv".into(), oxygen_csv)],
        merge,
        label_timestamps_ms: (0..cells).map(|k| (k as u64 * WINDOW_S * 1000) as i64).collect(),
        target_values: mo2[..cells].to_vec(),
        faults: vec![],
        thermal: None,
    }
}
