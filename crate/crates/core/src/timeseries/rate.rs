use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TimeSeriesError;

/// An exact sampling rate in hertz, stored as a reduced fraction.
///
/// Accepts `"25"`, `"1/60"` and decimal strings such as `"0.33"` (stored as
/// 33/100, never rounded to a nearby "nicer" fraction). JSON numbers are
/// accepted on input; output is always the fraction string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate {
    num: u64,
    den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Result<Self, TimeSeriesError> {
        if num == 0 || den == 0 {
            return Err(TimeSeriesError::InvalidRate(format!("{num}/{den}")));
        }
        let g = num.gcd(&den);
        Ok(Self { num: num / g, den: den / g })
    }

    pub fn hz(num: u64) -> Self {
        Self::new(num, 1).expect("rate must be positive")
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Nominal sample period rounded to the nearest millisecond (at least 1).
    pub fn period_ms(&self) -> u64 {
        let n = 1000u128 * self.den as u128;
        let d = self.num as u128;
        (((2 * n + d) / (2 * d)) as u64).max(1)
    }

    /// Rate of a grid with the given period.
    pub fn from_period_ms(period_ms: u64) -> Result<Self, TimeSeriesError> {
        Self::new(1000, period_ms)
    }

    /// Expected number of samples in `window_ms` at this rate, rounded to nearest.
    pub fn samples_in(&self, window_ms: u64) -> u64 {
        let n = window_ms as u128 * self.num as u128;
        let d = 1000u128 * self.den as u128;
        ((2 * n + d) / (2 * d)) as u64
    }

    /// Compares this rate against a grid period without floating point.
    pub fn cmp_period(&self, period_ms: u64) -> std::cmp::Ordering {
        // rate vs 1000/period  <=>  num * period vs 1000 * den
        (self.num as u128 * period_ms as u128).cmp(&(1000u128 * self.den as u128))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Rate {
    type Err = TimeSeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || TimeSeriesError::InvalidRate(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse::<u64>().map_err(|_| bad())?;
            let d = d.trim().parse::<u64>().map_err(|_| bad())?;
            return Rate::new(n, d);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let int = if int.is_empty() { 0 } else { int.parse::<u64>().map_err(|_| bad())? };
            let scale = 10u64.pow(frac.len() as u32);
            let frac = frac.parse::<u64>().map_err(|_| bad())?;
            let num = int.checked_mul(scale).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
            return Rate::new(num, scale);
        }
        Rate::new(s.parse::<u64>().map_err(|_| bad())?, 1)
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(u64),
            Float(f64),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Int(n) => n.to_string(),
            // serde_json prints the shortest round-trip decimal, which is what a
            // user wrote for values like 0.33.
            Raw::Float(x) => serde_json::Number::from_f64(x)
                .map(|n| n.to_string())
                .ok_or_else(|| serde::de::Error::custom("rate must be finite"))?,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_forms() {
        assert_eq!("25".parse::<Rate>().unwrap(), Rate::new(25, 1).unwrap());
        assert_eq!("1/60".parse::<Rate>().unwrap(), Rate::new(1, 60).unwrap());
        let r: Rate = "0.33".parse().unwrap();
        assert_eq!((r.numer(), r.denom()), (33, 100));
        assert!("0".parse::<Rate>().is_err());
        assert!("1/0".parse::<Rate>().is_err());
        assert!("abc".parse::<Rate>().is_err());
    }

    #[test]
    fn periods() {
        assert_eq!(Rate::hz(1).period_ms(), 1000);
        assert_eq!(Rate::hz(25).period_ms(), 40);
        assert_eq!(Rate::new(1, 180).unwrap().period_ms(), 180_000);
        assert_eq!("0.33".parse::<Rate>().unwrap().period_ms(), 3030);
        assert_eq!(Rate::hz(25).samples_in(40_000), 1000);
    }

    #[test]
    fn json_forms() {
        let r: Rate = serde_json::from_str("0.33").unwrap();
        assert_eq!(r.to_string(), "33/100");
        let r: Rate = serde_json::from_str("\"1/60\"").unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"1/60\"");
        let r: Rate = serde_json::from_str("25").unwrap();
        assert_eq!(r, Rate::hz(25));
    }
}
