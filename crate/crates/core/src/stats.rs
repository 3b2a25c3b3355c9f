//! Small numeric helpers shared by the aggregation, quality and model code.
//!
//! All functions take slices of finite values; callers strip MISSING entries
//! before calling in.

/// Arithmetic mean, computed relative to the first element so that a constant
/// slice returns its value exactly.
pub fn mean(xs: &[f64]) -> Option<f64> {
    let first = *xs.first()?;
    let shifted: f64 = xs.iter().map(|x| x - first).sum();
    Some(first + shifted / xs.len() as f64)
}

/// Sample standard deviation (n − 1 denominator). `None` for fewer than two values.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

pub fn min(xs: &[f64]) -> Option<f64> {
    xs.iter().copied().reduce(f64::min)
}

pub fn max(xs: &[f64]) -> Option<f64> {
    xs.iter().copied().reduce(f64::max)
}

pub fn sum(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum())
    }
}

pub fn median(xs: &[f64]) -> Option<f64> {
    quantile_sorted(&sorted(xs), 0.5)
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile by linear interpolation between order statistics ("type 7").
/// `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    if n == 1 {
        return Some(sorted[0]);
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi || sorted[lo] == sorted[hi] {
        Some(sorted[lo])
    } else {
        Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
    }
}

/// Ordinary least-squares slope of `ys` against `xs`. `None` when fewer than
/// two points or when `xs` has no spread.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}
