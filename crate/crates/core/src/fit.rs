//! Least-squares power-law fits on log-log data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points with two distinct abscissae, got {0}")]
    TooFew(usize),
    #[error("non-positive or non-finite value at point {0}")]
    NonPositive(usize),
}

/// `log y = intercept + exponent · log x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Standard error of the exponent.
    pub stderr: f64,
    /// `log y - fitted`, in input order.
    pub residuals: Vec<f64>,
    pub points: usize,
}

impl PowerFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.exponent * x.ln()).exp()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn power_fit(xs: &[f64], ys: &[f64]) -> Result<PowerFit, FitError> {
    let n = xs.len().min(ys.len());
    if let Some(i) = (0..n).find(|&i| !(xs[i] > 0.0 && ys[i] > 0.0 && xs[i].is_finite() && ys[i].is_finite())) {
        return Err(FitError::NonPositive(i));
    }
    let lx: Vec<f64> = xs[..n].iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys[..n].iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if n < 3 || sxx == 0.0 {
        return Err(FitError::TooFew(n));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - intercept - exponent * x).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let stderr = (rss / (n as f64 - 2.0) / sxx).sqrt();
    Ok(PowerFit {
        exponent,
        intercept,
        stderr,
        residuals,
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law_has_zero_error() {
        let xs = [2.0, 4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.75)).collect();
        let f = power_fit(&xs, &ys).unwrap();
        assert!((f.exponent - 0.75).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.stderr < 1e-12 && f.max_abs_residual() < 1e-12);
        assert!((f.predict(64.0) - 3.0 * 64f64.powf(0.75)).abs() < 1e-9);
    }

    #[test]
    fn stderr_matches_the_textbook_formula() {
        // ln y = [0, 1, 1, 3] at ln x = [0, 1, 2, 3]: slope 0.9, residuals 0.1, 0.2, -0.7, 0.4
        let xs: Vec<f64> = (0..4).map(|i| (i as f64).exp()).collect();
        let ys: Vec<f64> = [0.0, 1.0, 1.0, 3.0].iter().map(|v: &f64| v.exp()).collect();
        let f = power_fit(&xs, &ys).unwrap();
        assert!((f.exponent - 0.9).abs() < 1e-12);
        let rss = 0.01 + 0.04 + 0.49 + 0.16;
        assert!((f.stderr - (rss / 2.0 / 5.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert_eq!(power_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(FitError::TooFew(2)));
        assert_eq!(power_fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(FitError::TooFew(3)));
        assert_eq!(power_fit(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]), Err(FitError::NonPositive(1)));
    }

    proptest! {
        #[test]
        fn residuals_sum_to_zero(ys in proptest::collection::vec(0.01f64..100.0, 3..20)) {
            let xs: Vec<f64> = (1..=ys.len()).map(|i| i as f64).collect();
            let f = power_fit(&xs, &ys).unwrap();
            prop_assert!(f.residuals.iter().sum::<f64>().abs() < 1e-9);
            prop_assert!(f.stderr >= 0.0);
        }
    }
}
