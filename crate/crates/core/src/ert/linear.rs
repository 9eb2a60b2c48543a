//! Least-squares baselines on internally standardized features.
//!
//! Columns with zero variance get a zero coefficient. Ridge minimises
//! `||y - Zb||^2 + lambda ||b||^2`; Lasso minimises
//! `||y - Zb||^2 / (2n) + lambda ||b||_1`, both over the standardized
//! matrix `Z`. Coefficients are mapped back to raw feature units.

use alloc::vec;
use alloc::vec::Vec;

use super::{Regressor, Samples};
use crate::error::{Error, Result};

const LASSO_MAX_SWEEPS: usize = 5000;
const LASSO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearPenalty {
    None,
    Ridge(f64),
    Lasso(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

struct Standardized {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Columns with non-zero variance.
    kept: Vec<usize>,
    /// `Z^T Z` over kept columns, row-major.
    gram: Vec<f64>,
    /// `Z^T (y - mean(y))`.
    cross: Vec<f64>,
    y_mean: f64,
    n: usize,
}

fn standardize(samples: &Samples<'_>) -> Standardized {
    let (n, p) = (samples.len(), samples.n_features());
    let y = samples.targets();
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(samples.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; p];
    for i in 0..n {
        for ((v, x), m) in var.iter_mut().zip(samples.row(i)).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale: Vec<f64> = var.iter().map(|v| libm::sqrt(v / n as f64)).collect();
    let kept: Vec<usize> = (0..p)
        .filter(|&j| scale[j] > 1e-12 * (1.0 + mean[j].abs()))
        .collect();

    let q = kept.len();
    let mut gram = vec![0.0; q * q];
    let mut cross = vec![0.0; q];
    let mut z = vec![0.0; q];
    for i in 0..n {
        let row = samples.row(i);
        for (a, &j) in kept.iter().enumerate() {
            z[a] = (row[j] - mean[j]) / scale[j];
        }
        let dy = y[i] - y_mean;
        for a in 0..q {
            cross[a] += z[a] * dy;
            for b in a..q {
                gram[a * q + b] += z[a] * z[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            gram[a * q + b] = gram[b * q + a];
        }
    }
    Standardized {
        mean,
        scale,
        kept,
        gram,
        cross,
        y_mean,
        n,
    }
}

/// Gaussian elimination with partial pivoting; `a` is `q x q` row-major.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>, q: usize) -> Result<Vec<f64>> {
    let scale = (0..q).map(|i| a[i * q + i].abs()).fold(0.0, f64::max).max(1.0);
    for col in 0..q {
        let pivot = (col..q)
            .max_by(|&r, &s| a[r * q + col].abs().total_cmp(&a[s * q + col].abs()))
            .unwrap_or(col);
        if a[pivot * q + col].abs() <= 1e-11 * scale {
            return Err(Error::SingularMatrix { pivot: col });
        }
        if pivot != col {
            for k in 0..q {
                a.swap(col * q + k, pivot * q + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * q + col];
        for r in col + 1..q {
            let f = a[r * q + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..q {
                a[r * q + k] -= f * a[col * q + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; q];
    for r in (0..q).rev() {
        let mut acc = b[r];
        for k in r + 1..q {
            acc -= a[r * q + k] * x[k];
        }
        x[r] = acc / a[r * q + r];
    }
    Ok(x)
}

fn lasso(st: &Standardized, lambda: f64) -> Vec<f64> {
    let q = st.kept.len();
    let n = st.n as f64;
    let mut beta = vec![0.0; q];
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for j in 0..q {
            let g_jj = st.gram[j * q + j] / n;
            let mut rho = st.cross[j] / n;
            for k in 0..q {
                if k != j {
                    rho -= st.gram[j * q + k] / n * beta[k];
                }
            }
            let next = if rho > lambda {
                (rho - lambda) / g_jj
            } else if rho < -lambda {
                (rho + lambda) / g_jj
            } else {
                0.0
            };
            max_change = max_change.max((next - beta[j]).abs());
            beta[j] = next;
        }
        if max_change < LASSO_TOL {
            break;
        }
    }
    beta
}

impl LinearModel {
    pub fn fit(samples: &Samples<'_>, penalty: LinearPenalty) -> Result<Self> {
        let p = samples.n_features();
        let st = standardize(samples);
        let q = st.kept.len();
        let beta = match penalty {
            LinearPenalty::None => solve(st.gram.clone(), st.cross.clone(), q)?,
            LinearPenalty::Ridge(lambda) => {
                let mut a = st.gram.clone();
                for j in 0..q {
                    a[j * q + j] += lambda;
                }
                solve(a, st.cross.clone(), q)?
            }
            LinearPenalty::Lasso(lambda) => lasso(&st, lambda),
        };
        let mut coefficients = vec![0.0; p];
        let mut intercept = st.y_mean;
        for (a, &j) in st.kept.iter().enumerate() {
            coefficients[j] = beta[a] / st.scale[j];
            intercept -= coefficients[j] * st.mean[j];
        }
        Ok(Self {
            intercept,
            coefficients,
        })
    }
}

impl Regressor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.3 - 4.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = LinearModel::fit(&Samples::new(&x, &y, 1).unwrap(), LinearPenalty::None).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-8);
        assert!((m.intercept - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ols_multivariate_with_constant_column() {
        // column 2 is constant and must be ignored rather than make the
        // system singular
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i % 7) as f64;
            let b = (i * i % 11) as f64;
            x.extend_from_slice(&[a, b, 5.0]);
            y.push(3.0 * a - 0.5 * b + 7.0);
        }
        let m = LinearModel::fit(&Samples::new(&x, &y, 3).unwrap(), LinearPenalty::None).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-8);
        assert!((m.coefficients[1] + 0.5).abs() < 1e-8);
        assert_eq!(m.coefficients[2], 0.0);
        assert!((m.intercept - 7.0).abs() < 1e-8);
    }

    #[test]
    fn ols_rejects_collinear_columns() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            let a = i as f64;
            x.extend_from_slice(&[a, 2.0 * a]);
            y.push(a);
        }
        let err = LinearModel::fit(&Samples::new(&x, &y, 2).unwrap(), LinearPenalty::None);
        assert!(matches!(err, Err(Error::SingularMatrix { .. })));
        // ridge handles it
        assert!(LinearModel::fit(&Samples::new(&x, &y, 2).unwrap(), LinearPenalty::Ridge(1.0)).is_ok());
    }

    #[test]
    fn huge_ridge_shrinks_to_mean() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v - 2.0).collect();
        let mean = y.iter().sum::<f64>() / 50.0;
        let m = LinearModel::fit(&Samples::new(&x, &y, 1).unwrap(), LinearPenalty::Ridge(1e14)).unwrap();
        assert!(m.coefficients[0].abs() < 1e-9);
        assert!((m.intercept - mean).abs() < 1e-6);
    }

    #[test]
    fn lasso_zeroes_noise_and_keeps_signal() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let a = (i % 13) as f64;
            let noise = ((i * 7919) % 17) as f64;
            x.extend_from_slice(&[a, noise]);
            y.push(5.0 * a);
        }
        let s = Samples::new(&x, &y, 2).unwrap();
        let m = LinearModel::fit(&s, LinearPenalty::Lasso(0.5)).unwrap();
        assert!(m.coefficients[0] > 4.0);
        assert!(m.coefficients[1].abs() < 0.05);
        let none = LinearModel::fit(&s, LinearPenalty::Lasso(1e9)).unwrap();
        assert_eq!(none.coefficients, vec![0.0, 0.0]);
    }
}
