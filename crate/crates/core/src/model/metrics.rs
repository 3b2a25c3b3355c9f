use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::stats;
use crate::timeseries::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the actuals are constant and the predictions miss them.
    pub r2: Option<f64>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Regression metrics over the rows where both sides are present.
pub fn evaluate(predictions: &[Value], actuals: &[Value]) -> Result<Metrics, ModelError> {
    if predictions.len() != actuals.len() {
        return Err(ModelError::LengthMismatch { predictions: predictions.len(), actuals: actuals.len() });
    }
    let (p, a): (Vec<f64>, Vec<f64>) = predictions
        .iter()
        .zip(actuals)
        .filter_map(|(p, a)| Some(((*p)?, (*a)?)))
        .unzip();
    let n = a.len();
    if n == 0 {
        return Err(ModelError::NoComparablePairs);
    }
    let sse: f64 = p.iter().zip(&a).map(|(p, a)| (p - a) * (p - a)).sum();
    let sae: f64 = p.iter().zip(&a).map(|(p, a)| (p - a).abs()).sum();
    let mean = stats::mean(&a).expect("n >= 1");
    let sst: f64 = a.iter().map(|a| (a - mean) * (a - mean)).sum();
    let mae = sae / n as f64;
    // sqrt(mean sq) >= mean abs holds exactly; max() absorbs rounding.
    let rmse = (sse / n as f64).sqrt().max(mae);
    let (r2, note) = if sst > 0.0 {
        (Some(1.0 - sse / sst), None)
    } else if sse == 0.0 {
        (Some(1.0), None)
    } else {
        (None, Some("actual values are constant, so r2 is undefined".to_string()))
    };
    Ok(Metrics { rmse, mae, r2, n, note })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vec<Value> {
        xs.iter().copied().map(Some).collect()
    }

    #[test]
    fn perfect_and_mean_predictions() {
        let a = v(&[1.0, 2.0, 4.0]);
        let m = evaluate(&a, &a).unwrap();
        assert_eq!((m.rmse, m.mae, m.r2), (0.0, 0.0, Some(1.0)));
        let mean = 7.0 / 3.0;
        let m = evaluate(&v(&[mean; 3]), &a).unwrap();
        assert!(m.r2.unwrap().abs() < 1e-15);
    }

    #[test]
    fn sqrt_two_point_five() {
        let m = evaluate(&v(&[1.0, 2.0]), &v(&[2.0, 4.0])).unwrap();
        assert_eq!(m.mae, 1.5);
        assert!((m.rmse - 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_actuals_and_errors() {
        let m = evaluate(&v(&[1.0, 2.0]), &v(&[1.0, 1.0])).unwrap();
        assert_eq!(m.r2, None);
        assert!(m.note.is_some());
        assert_eq!(evaluate(&v(&[1.0, 1.0]), &v(&[1.0, 1.0])).unwrap().r2, Some(1.0));
        assert_eq!(evaluate(&v(&[1.0]), &v(&[1.0, 2.0])).unwrap_err(), ModelError::LengthMismatch { predictions: 1, actuals: 2 });
        assert_eq!(evaluate(&[None, Some(1.0)], &[Some(1.0), None]).unwrap_err(), ModelError::NoComparablePairs);
        let m = evaluate(&[None, Some(1.0), Some(3.0)], &[Some(9.0), Some(2.0), Some(3.0)]).unwrap();
        assert_eq!(m.n, 2);
        assert_eq!(m.mae, 0.5);
    }
}
