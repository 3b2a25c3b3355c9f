//! Software sensors: auxiliary variables derived from hardware channels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;
use crate::timeseries::{present, Rate, RawChannel, Sample, TimeSeriesError};

/// Which ODBA construction is used; recorded in run records.
pub const ODBA_FORM: &str = "absolute-sum ODBA: |x - mean_x| + |y - mean_y| + |z - mean_z|, centred running mean, edge windows shifted inward";
pub const MO2_FORM: &str = "closed respirometry: MO2 = -dDO/dt [mg/L/h] * volume [L] / mass [kg]";

pub const DEFAULT_STATIC_WINDOW_MS: u64 = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("acceleration axes do not share timestamps")]
    MismatchedAxes,
    #[error("window of {window_ms} ms holds fewer than 2 samples")]
    WindowTooShort { window_ms: u64 },
    #[error("respirometry volume and mass must be positive")]
    NonpositiveSetup,
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
}

/// Three acceleration axes sampled at the same instants.
#[derive(Debug, Clone)]
pub struct TriAxialAccel {
    x: RawChannel,
    y: RawChannel,
    z: RawChannel,
}

impl TriAxialAccel {
    pub fn new(x: RawChannel, y: RawChannel, z: RawChannel) -> Result<Self, SensorError> {
        let same = |a: &RawChannel, b: &RawChannel| a.len() == b.len() && a.timestamps().eq(b.timestamps());
        if !same(&x, &y) || !same(&x, &z) {
            return Err(SensorError::MismatchedAxes);
        }
        Ok(Self { x, y, z })
    }

    pub fn axes(&self) -> [&RawChannel; 3] {
        [&self.x, &self.y, &self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RespirometrySetup {
    pub volume_liters: f64,
    pub mass_kg: f64,
}

impl RespirometrySetup {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.volume_liters > 0.0 && self.mass_kg > 0.0 && self.volume_liters.is_finite() && self.mass_kg.is_finite() {
            Ok(())
        } else {
            Err(SensorError::NonpositiveSetup)
        }
    }
}

/// Sample range `[start, start + n)` of the centred window around `i`,
/// shifted inward at the series ends so it always holds `n` samples.
fn centred_window(i: usize, n: usize, len: usize) -> std::ops::Range<usize> {
    let start = i.saturating_sub(n / 2).min(len - n);
    start..start + n
}

/// Overall dynamic body acceleration.
///
/// The static component of each axis is its running mean over
/// `static_window_ms`, converted to a sample count at the nominal rate. The
/// output has the input's timestamps; a sample with any MISSING axis is
/// MISSING.
pub fn odba(accel: &TriAxialAccel, static_window_ms: u64) -> Result<RawChannel, SensorError> {
    let rate = accel.x.rate();
    let n = rate.samples_in(static_window_ms) as usize;
    if n < 2 {
        return Err(SensorError::WindowTooShort { window_ms: static_window_ms });
    }
    let len = accel.x.len();
    if len == 0 {
        return Err(TimeSeriesError::EmptyChannel(accel.x.name().to_string()).into());
    }
    let n = n.min(len);
    let axes: Vec<Vec<Option<f64>>> = accel.axes().iter().map(|c| c.values().collect()).collect();

    let samples = (0..len)
        .map(|i| {
            let w = centred_window(i, n, len);
            let mut total = Some(0.0);
            for axis in &axes {
                let dynamic = axis[i].and_then(|v| {
                    let static_part = stats::mean(&present(axis[w.clone()].iter().copied()))?;
                    Some((v - static_part).abs())
                });
                total = total.zip(dynamic).map(|(a, b)| a + b);
            }
            Sample { t: accel.x.samples()[i].t, value: total }
        })
        .collect();
    Ok(RawChannel::new("odba", "m/s²", rate, samples)?)
}

/// Mass-specific oxygen uptake from a dissolved-oxygen trace (mg/L).
///
/// The trace is cut into consecutive windows of `slope_window_ms` starting at
/// its first sample. Each window yields one sample, stamped with the window's
/// last sample time: `-slope * volume / mass` with the slope in mg/L per hour.
/// Windows with fewer than two present samples give MISSING.
pub fn oxygen_uptake_rate(
    dissolved_oxygen: &RawChannel,
    setup: &RespirometrySetup,
    slope_window_ms: u64,
) -> Result<RawChannel, SensorError> {
    setup.validate()?;
    if slope_window_ms == 0 || dissolved_oxygen.rate().samples_in(slope_window_ms) < 2 {
        return Err(SensorError::WindowTooShort { window_ms: slope_window_ms });
    }
    let (first, last) = dissolved_oxygen
        .span()
        .ok_or_else(|| TimeSeriesError::EmptyChannel(dissolved_oxygen.name().to_string()))?;
    let w = slope_window_ms as i64;
    let mut out = Vec::new();
    let mut lo = first.0;
    while lo <= last.0 {
        let window = &dissolved_oxygen.samples()[dissolved_oxygen.range_of(lo, lo + w)];
        if let Some(end) = window.last() {
            let (hours, values): (Vec<f64>, Vec<f64>) = window
                .iter()
                .filter_map(|s| s.value.map(|v| ((s.t.0 - lo) as f64 / 3_600_000.0, v)))
                .unzip();
            let value = stats::ols_slope(&hours, &values).map(|slope| -slope * setup.volume_liters / setup.mass_kg);
            out.push(Sample { t: end.t, value });
        }
        lo += w;
    }
    let rate = Rate::new(1000, slope_window_ms)?;
    Ok(RawChannel::new("mo2", "mg O2/kg/h", rate, out)?)
}
