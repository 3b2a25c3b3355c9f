use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_csv, DerivedChannel, IngestError, MergeSpec, ParseReport};
use crate::par;
use crate::sensors::{self, RespirometrySetup, TriAxialAccel};
use crate::timeseries::{
    infer_grid, resample, resample_direction, window_aggregate, GridStrategy, LabelAlignment, Rate, RawChannel,
    ResampleDirection, TimeGrid, TimeIndex, TimeTable, Value,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeDirection {
    Downsampled,
    Upsampled,
    /// Reduced to windowed features.
    Windowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnFill {
    pub name: String,
    pub fill_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub name: String,
    pub unit: String,
    pub native_rate_hz: Rate,
    pub direction: MergeDirection,
    pub derived: bool,
    pub excluded: bool,
    /// Lowest fill fraction over the channel's output columns (1.0 when excluded).
    pub fill_fraction: f64,
    pub columns: Vec<ColumnFill>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_alignment: Option<LabelAlignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub grid: TimeGrid,
    pub grid_strategy: GridStrategy,
    pub rows: usize,
    pub channels: Vec<ChannelReport>,
    pub sources: Vec<ParseReport>,
    /// How slow label channels relate to the features computed around them.
    pub label_note: String,
}

impl MergeReport {
    pub fn channel(&self, name: &str) -> Option<&ChannelReport> {
        self.channels.iter().find(|c| c.name == name)
    }
}

const LABEL_NOTE: &str = "Values of a channel resampled onto its own rate are taken as readings at the grid point; \
windowed features with window_end alignment summarise the window that closes at that grid point.";

/// Parses every source (relative paths against `base_dir`) and merges them.
pub fn merge_sources(spec: &MergeSpec, base_dir: &Path) -> Result<(TimeTable, MergeReport), IngestError> {
    let mut seen = HashSet::new();
    for d in &spec.sources {
        if d.value_columns.is_empty() {
            return Err(IngestError::InvalidSpec(format!("source `{}` lists no value columns", d.channel_name)));
        }
        for name in d.channel_names() {
            if !seen.insert(name.clone()) {
                return Err(IngestError::DuplicateChannelName(name));
            }
        }
    }
    let parsed = par::map(&spec.sources, |d| parse_csv(&base_dir.join(&d.path), d));
    let mut channels = Vec::new();
    let mut reports = Vec::new();
    for (p, d) in parsed.into_iter().zip(&spec.sources) {
        let (c, mut r) = p?;
        // as declared, so reports do not depend on where the run happens
        r.path = d.path.display().to_string();
        channels.extend(c);
        reports.push(r);
    }
    merge_channels(spec, channels, reports)
}

/// Merges already parsed channels according to `spec` (its `sources` are only
/// used for naming checks here).
pub fn merge_channels(
    spec: &MergeSpec,
    channels: Vec<RawChannel>,
    parse_reports: Vec<ParseReport>,
) -> Result<(TimeTable, MergeReport), IngestError> {
    let mut names: HashSet<String> = HashSet::new();
    for c in &channels {
        if !names.insert(c.name().to_string()) {
            return Err(IngestError::DuplicateChannelName(c.name().to_string()));
        }
    }

    let mut derived = Vec::new();
    for d in &spec.derived {
        let find = |n: &str| {
            channels
                .iter()
                .chain(derived.iter())
                .find(|c: &&RawChannel| c.name() == n)
                .ok_or_else(|| IngestError::UnknownChannel(n.to_string()))
        };
        let out = match d {
            DerivedChannel::Odba { name, x, y, z, static_window_ms } => {
                let accel = TriAxialAccel::new(find(x)?.clone(), find(y)?.clone(), find(z)?.clone())?;
                sensors::odba(&accel, *static_window_ms)?.with_name(name.clone())
            }
            DerivedChannel::OxygenUptake { name, dissolved_oxygen, volume_liters, mass_kg, slope_window_ms } => {
                let setup = RespirometrySetup { volume_liters: *volume_liters, mass_kg: *mass_kg };
                sensors::oxygen_uptake_rate(find(dissolved_oxygen)?, &setup, *slope_window_ms)?.with_name(name.clone())
            }
        };
        if !names.insert(out.name().to_string()) {
            return Err(IngestError::DuplicateChannelName(out.name().to_string()));
        }
        derived.push(out);
    }

    let known = |n: &String| names.contains(n.as_str());
    for n in spec.per_channel_policy.keys().chain(spec.feature_specs.keys()).chain(spec.exclude.iter()) {
        if !known(n) {
            return Err(IngestError::UnknownChannel(n.clone()));
        }
    }

    // The grid comes from the measured channels; a derived channel only takes
    // part when it is the named master.
    let mut grid_inputs: Vec<RawChannel> = channels.clone();
    if let GridStrategy::MasterChannel(m) = &spec.grid_strategy {
        if let Some(d) = derived.iter().find(|d| d.name() == m) {
            grid_inputs.push(d.clone());
        }
    }
    let grid = infer_grid(&grid_inputs, &spec.grid_strategy)?;

    let derived_names: HashSet<String> = derived.iter().map(|d| d.name().to_string()).collect();
    let excluded: HashSet<&str> = spec.exclude.iter().map(String::as_str).collect();
    let all: Vec<RawChannel> = channels.into_iter().chain(derived).collect();

    let placed = par::map(&all, |c| place_channel(c, spec, &grid));
    let mut columns: Vec<(String, Vec<Value>)> = Vec::new();
    let mut units = BTreeMap::new();
    let mut channel_reports = Vec::new();
    let mut out_names = HashSet::new();
    for (c, placed) in all.iter().zip(placed) {
        let (cols, direction, alignment) = placed?;
        let excluded = excluded.contains(c.name());
        let mut fills = Vec::new();
        for (name, values) in cols {
            let filled = values.iter().filter(|v| v.is_some()).count();
            fills.push(ColumnFill { name: name.clone(), fill_fraction: filled as f64 / grid.count as f64 });
            if excluded {
                continue;
            }
            if !out_names.insert(name.clone()) {
                return Err(IngestError::DuplicateChannelName(name));
            }
            units.insert(name.clone(), c.unit().to_string());
            columns.push((name, values));
        }
        let fill_fraction = fills.iter().map(|f| f.fill_fraction).fold(1.0, f64::min);
        channel_reports.push(ChannelReport {
            name: c.name().to_string(),
            unit: c.unit().to_string(),
            native_rate_hz: c.rate(),
            direction,
            derived: derived_names.contains(c.name()),
            excluded,
            fill_fraction,
            columns: fills,
            label_alignment: alignment,
        });
    }

    let table = TimeTable::new(TimeIndex::Regular(grid), columns)?.with_units(units);
    let report = MergeReport {
        grid,
        grid_strategy: spec.grid_strategy.clone(),
        rows: grid.count,
        channels: channel_reports,
        sources: parse_reports,
        label_note: LABEL_NOTE.to_string(),
    };
    Ok((table, report))
}

type Placed = (Vec<(String, Vec<Value>)>, MergeDirection, Option<LabelAlignment>);

fn place_channel(c: &RawChannel, spec: &MergeSpec, grid: &TimeGrid) -> Result<Placed, IngestError> {
    if let Some(fs) = spec.feature_specs.get(c.name()) {
        let cols = window_aggregate(c, fs, grid)?;
        return Ok((cols, MergeDirection::Windowed, Some(fs.label_alignment)));
    }
    let policy = spec.per_channel_policy.get(c.name()).unwrap_or(&spec.default_policy);
    let values = resample(c, grid, policy)?;
    let direction = match resample_direction(c, grid) {
        ResampleDirection::Downsampled => MergeDirection::Downsampled,
        ResampleDirection::Upsampled => MergeDirection::Upsampled,
    };
    Ok((vec![(c.name().to_string(), values)], direction, None))
}
