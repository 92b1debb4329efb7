//! Ordinary least-squares line fits, used to read exponential rates off
//! model quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of fitting `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for a perfect fit.
    pub r2: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::domain("fit: x and y lengths differ"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::domain("fit: need at least two points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("fit: non-finite sample"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::domain("fit: degenerate abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept,
        r2,
        n,
    })
}

/// Fits `ln y` against `x`. Every `y` must be strictly positive.
pub fn log_slope(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::domain(format!("log fit: non-positive sample {bad}")));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(x, &ly)
}

/// Log-log fit: the growth exponent of `y` as a power of `x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::domain("log-log fit: non-positive abscissa"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    log_slope(&lx, y)
}
