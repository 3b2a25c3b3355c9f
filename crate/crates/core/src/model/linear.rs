use serde::{Deserialize, Serialize};

use super::{Design, ModelError};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    /// One coefficient per feature, in feature order.
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Relative size below which a pivot marks a dependent column.
const RANK_TOL: f64 = 1e-10;

/// OLS with intercept on centred data. Householder QR when the centred design
/// has full column rank, ridge-regularised normal equations otherwise. The
/// flag reports whether the ridge path was taken.
pub(crate) fn fit(d: &Design, ridge_epsilon: f64) -> Result<(LinearModel, bool), ModelError> {
    let (n, p) = (d.n(), d.p);
    let x_mean: Vec<f64> = (0..p)
        .map(|j| stats::mean(&(0..n).map(|i| d.at(i, j)).collect::<Vec<_>>()).expect("n >= 1"))
        .collect();
    let y_mean = stats::mean(&d.y).expect("n >= 1");
    // column-major centred copy
    let cols: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| d.at(i, j) - x_mean[j]).collect()).collect();
    let yc: Vec<f64> = d.y.iter().map(|y| y - y_mean).collect();

    let (beta, ridge) = match qr_solve(cols.clone(), yc.clone()) {
        Some(b) => (b, false),
        None => (ridge_solve(&cols, &yc, ridge_epsilon)?, true),
    };
    let intercept = y_mean - x_mean.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    Ok((LinearModel { intercept, coefficients: beta }, ridge))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least squares via Householder reflections. `None` if a column is (nearly)
/// a combination of the earlier ones.
fn qr_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let p = a.len();
    let n = b.len();
    if n < p {
        return None;
    }
    let norms: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    for k in 0..p {
        let norm = dot(&a[k][k..], &a[k][k..]).sqrt();
        if norms[k] == 0.0 || norm <= RANK_TOL * norms[k] {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        if vv > 0.0 {
            for col in a.iter_mut().skip(k) {
                let s = 2.0 * dot(&v, &col[k..]) / vv;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= s * vi;
                }
            }
            let s = 2.0 * dot(&v, &b[k..]) / vv;
            for (c, vi) in b[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
    }
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[j][k] * beta[j]).sum();
        beta[k] = (b[k] - s) / a[k][k];
    }
    beta.iter().all(|b| b.is_finite()).then_some(beta)
}

/// Solves `(XᵀX + εI) β = Xᵀy` by Cholesky.
fn ridge_solve(cols: &[Vec<f64>], y: &[f64], eps: f64) -> Result<Vec<f64>, ModelError> {
    let p = cols.len();
    let mut g = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            g[i][j] = dot(&cols[i], &cols[j]) + if i == j { eps } else { 0.0 };
        }
    }
    let rhs: Vec<f64> = cols.iter().map(|c| dot(c, y)).collect();
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s = g[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return Err(ModelError::DegenerateData("regularised normal equations are not positive definite".into()));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        z[i] = (rhs[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        beta[i] = (z[i] - (i + 1..p).map(|k| l[k][i] * beta[k]).sum::<f64>()) / l[i][i];
    }
    Ok(beta)
}
