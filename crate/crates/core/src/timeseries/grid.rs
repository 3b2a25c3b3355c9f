use serde::{Deserialize, Serialize};

use super::{RawChannel, TimeGrid, TimeSeriesError, Timestamp};

/// How the common merge grid is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridStrategy {
    /// Use the named channel's nominal period; grid points sit on its samples.
    MasterChannel(String),
    /// Fixed period, starting at the beginning of the common time range.
    Explicit { period_ms: u64 },
    /// Master = the channel with the lowest nominal rate.
    #[default]
    SlowestChannel,
}

/// Derives the grid spanning the intersection of all channel time ranges.
pub fn infer_grid(channels: &[RawChannel], strategy: &GridStrategy) -> Result<TimeGrid, TimeSeriesError> {
    let mut lo = i64::MIN;
    let mut hi = i64::MAX;
    if channels.is_empty() {
        return Err(TimeSeriesError::NoTemporalOverlap);
    }
    for c in channels {
        let (a, b) = c.span().ok_or_else(|| TimeSeriesError::EmptyChannel(c.name().to_string()))?;
        lo = lo.max(a.0);
        hi = hi.min(b.0);
    }
    if lo > hi {
        return Err(TimeSeriesError::NoTemporalOverlap);
    }

    let (start, period_ms) = match strategy {
        GridStrategy::Explicit { period_ms } => {
            if *period_ms == 0 {
                return Err(TimeSeriesError::InvalidGrid("period must be positive".into()));
            }
            (lo, *period_ms)
        }
        GridStrategy::MasterChannel(name) => {
            let master = channels
                .iter()
                .find(|c| c.name() == name)
                .ok_or_else(|| TimeSeriesError::UnknownMasterChannel(name.clone()))?;
            master_start(master, lo, hi)?
        }
        GridStrategy::SlowestChannel => {
            let slowest = channels
                .iter()
                .min_by(|a, b| {
                    let (ra, rb) = (a.rate(), b.rate());
                    (ra.numer() as u128 * rb.denom() as u128)
                        .cmp(&(rb.numer() as u128 * ra.denom() as u128))
                        .then_with(|| a.name().cmp(b.name()))
                })
                .expect("non-empty");
            master_start(slowest, lo, hi)?
        }
    };
    let count = ((hi - start) / period_ms as i64) as usize + 1;
    TimeGrid::new(Timestamp(start), period_ms, count)
}

fn master_start(master: &RawChannel, lo: i64, hi: i64) -> Result<(i64, u64), TimeSeriesError> {
    let first = master
        .timestamps()
        .find(|t| t.0 >= lo)
        .map(|t| t.0)
        .filter(|&t| t <= hi)
        .ok_or(TimeSeriesError::NoTemporalOverlap)?;
    Ok((first, master.rate().period_ms()))
}

#[cfg(test)]
mod tests {
    use super::super::Rate;
    use super::*;

    fn span_channel(name: &str, from_s: i64, to_s: i64) -> RawChannel {
        let values: Vec<f64> = (from_s..=to_s).map(|v| v as f64).collect();
        RawChannel::regular(name, "", Rate::hz(1), Timestamp(from_s * 1000), &values)
    }

    #[test]
    fn explicit_period_intersection() {
        let a = span_channel("a", 0, 100);
        let b = span_channel("b", 50, 150);
        let g = infer_grid(&[a, b], &GridStrategy::Explicit { period_ms: 1000 }).unwrap();
        assert_eq!(g.start, Timestamp(50_000));
        assert_eq!(g.end(), Timestamp(100_000));
        assert_eq!(g.count, 51);
    }

    #[test]
    fn master_channel_period() {
        let wear = span_channel("wear", 0, 3 * 3600);
        let labels: Vec<f64> = vec![1.0; 60];
        let chamber = RawChannel::regular("chamber", "W", Rate::new(1, 180).unwrap(), Timestamp(180_000), &labels);
        let g = infer_grid(&[wear, chamber], &GridStrategy::MasterChannel("chamber".into())).unwrap();
        assert_eq!(g.period_ms, 180_000);
        assert_eq!(g.start, Timestamp(180_000));
        assert_eq!(g.count, 60);
        let g2 = infer_grid(
            &[span_channel("wear", 0, 3 * 3600), RawChannel::regular("chamber", "W", Rate::new(1, 180).unwrap(), Timestamp(180_000), &labels)],
            &GridStrategy::SlowestChannel,
        )
        .unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn single_channel_identity() {
        let a = span_channel("a", 3, 42);
        let g = infer_grid(std::slice::from_ref(&a), &GridStrategy::MasterChannel("a".into())).unwrap();
        assert_eq!(g.start, Timestamp(3000));
        assert_eq!(g.period_ms, 1000);
        assert_eq!(g.count, a.len());
    }

    #[test]
    fn errors() {
        let a = span_channel("a", 0, 10);
        let b = span_channel("b", 20, 30);
        assert_eq!(
            infer_grid(&[a.clone(), b], &GridStrategy::Explicit { period_ms: 1000 }),
            Err(TimeSeriesError::NoTemporalOverlap)
        );
        assert_eq!(
            infer_grid(&[a], &GridStrategy::MasterChannel("zzz".into())),
            Err(TimeSeriesError::UnknownMasterChannel("zzz".into()))
        );
    }
}
