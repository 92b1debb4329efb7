//! Jacobi functions, the recessive second solution and spherical profiles.

pub mod hyp2f1;
pub mod jacobi;
pub mod ode;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hyp2f1::{hyp2f1, SeriesValue};
pub use jacobi::{
    branch_gap, jacobi_phi, jacobi_phi_second, jacobi_phi_second_trace, jacobi_phi_trace,
    ode_residual, spherical_profile, JacobiParams, T0, T_SWITCH,
};

/// How a trace value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Series,
    Ode,
    SecondSolution,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Ode => "ode",
            Method::SecondSolution => "second-solution",
        }
    }
}

/// Complex function values on an increasing grid, with per-point error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionTrace {
    pub t: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Relative error estimate per point.
    pub errors: Vec<f64>,
    pub methods: Vec<Method>,
}

impl FunctionTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Writes `t,re,im,err,method` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,re,im,err,method\n");
        for i in 0..self.len() {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                self.t[i],
                self.values[i].re,
                self.values[i].im,
                self.errors[i],
                self.methods[i].as_str()
            ));
        }
        s
    }
}

/// Checks that a grid is finite, nonnegative and strictly increasing.
pub(crate) fn validate_grid(t: &[f64]) -> Result<()> {
    if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain("grid values must be finite and nonnegative"));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("grid must be strictly increasing"));
    }
    Ok(())
}

/// `n + 1` evenly spaced points from `a` to `b`, both included.
pub fn uniform_grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step).round() as usize;
    (0..=n).map(|i| a + i as f64 * step).collect()
}
