//! Averaging and maximal operators on the annular model.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnnularGrid, Normalization, ProductKernel};
use crate::weights::Weight;

/// Grid plus the normalized kernels `P_1, …, P_{N_max}`.
#[derive(Debug, Clone)]
pub struct RadialModel {
    pub grid: Arc<AnnularGrid>,
    pub n_max: usize,
    pub normalization: Normalization,
    kernels: Vec<ProductKernel>,
}

/// Nonnegative values on annuli `1..=valid_upto`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    /// `f_j` stored at index `j - 1`.
    pub values: Vec<f64>,
}

/// Result of a discrete maximal operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalResult {
    pub values: Vec<f64>,
    /// Scale attaining the maximum at each annulus.
    pub argmax: Vec<usize>,
    pub n_max: usize,
    /// Last annulus whose value is free of grid truncation.
    pub valid_upto: usize,
}

impl MaximalResult {
    pub fn function(&self) -> RadialFunction {
        RadialFunction { values: self.values.clone() }
    }
}

impl RadialFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!("radial function value {v} is not finite and nonnegative")));
        }
        Ok(RadialFunction { values })
    }

    pub fn zeros(n: usize) -> Self {
        RadialFunction { values: vec![0.0; n] }
    }

    /// Indicator of `Ω_j` on annuli `1..=n`.
    pub fn indicator(n: usize, j: usize) -> Result<Self> {
        if j == 0 || j > n {
            return Err(Error::range(format!("annulus {j} outside 1..={n}")));
        }
        let mut values = vec![0.0; n];
        values[j - 1] = 1.0;
        Ok(RadialFunction { values })
    }

    pub fn from_weight(w: &Weight) -> Self {
        RadialFunction { values: w.values.clone() }
    }

    /// Last annulus carrying a value.
    pub fn valid_upto(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    /// Pointwise `|f|^s`.
    pub fn powf(&self, s: f64) -> Self {
        RadialFunction { values: self.values.iter().map(|v| v.powf(s)).collect() }
    }

    /// Drops annuli beyond `n`.
    pub fn truncated(&self, n: usize) -> Self {
        RadialFunction { values: self.values[..n.min(self.values.len())].to_vec() }
    }
}

/// `⟨f, g⟩ = Σ_i f_i g_i |Ω_i|` over the common window.
pub fn inner(grid: &AnnularGrid, f: &RadialFunction, g: &RadialFunction) -> f64 {
    f.values
        .iter()
        .zip(&g.values)
        .enumerate()
        .map(|(i, (a, b))| a * b * grid.measure(i + 1))
        .sum()
}

impl RadialModel {
    pub fn new(grid: Arc<AnnularGrid>, n_max: usize, normalization: Normalization) -> Result<Self> {
        if n_max == 0 || n_max + 1 > grid.j_max {
            return Err(Error::range(format!(
                "N_max = {n_max} must lie in 1..={}",
                grid.j_max.saturating_sub(1)
            )));
        }
        let kernels = (1..=n_max)
            .into_par_iter()
            .map(|n| {
                let mut k = grid.product_kernel(n)?;
                k.normalize(&grid, normalization)?;
                Ok(k)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RadialModel {
            grid,
            n_max,
            normalization,
            kernels,
        })
    }

    pub fn j_max(&self) -> usize {
        self.grid.j_max
    }

    /// Kernel at scale `n`.
    pub fn kernel(&self, n: usize) -> Result<&ProductKernel> {
        if n == 0 || n > self.n_max {
            return Err(Error::range(format!("scale N = {n} outside 1..={}", self.n_max)));
        }
        Ok(&self.kernels[n - 1])
    }

    /// Last valid output annulus after `k` maximal passes over data valid up to `J_max`.
    pub fn valid_after(&self, k: usize) -> usize {
        self.j_max().saturating_sub(k * (self.n_max + 1))
    }

    fn check_input(&self, f: &RadialFunction) -> Result<()> {
        if f.valid_upto() > self.j_max() {
            return Err(Error::range(format!(
                "function has {} annuli, grid has {}",
                f.valid_upto(),
                self.j_max()
            )));
        }
        Ok(())
    }

    /// `A_N f(i) = Σ_j P_N(i, j) f_j / (V(N) |Ω_i|)` for `i ≤ valid_upto(f) - N - 1`.
    pub fn avg(&self, f: &RadialFunction, n: usize) -> Result<RadialFunction> {
        self.check_input(f)?;
        let k = self.kernel(n)?;
        let out = f.valid_upto().checked_sub(n + 1).filter(|&o| o > 0).ok_or_else(|| {
            Error::range(format!("no valid annuli left for A_{n} on {} input annuli", f.valid_upto()))
        })?;
        Ok(RadialFunction { values: self.avg_rows(f, k, out) })
    }

    fn avg_rows(&self, f: &RadialFunction, k: &ProductKernel, out: usize) -> Vec<f64> {
        let vn = self.grid.volume_at(k.n);
        (1..=out)
            .map(|i| {
                let s: f64 = k.row(i).map(|(j, p)| p * f.at(j)).sum();
                s / (vn * self.grid.measure(i))
            })
            .collect()
    }

    /// Direct annular double sum `Σ_j |Ω_j ∩ B(x_i, N)| f_j / V(N)` with `x_i` at distance `D_i`.
    pub fn avg_direct(&self, f: &RadialFunction, n: usize) -> Result<RadialFunction> {
        self.check_input(f)?;
        let out = f.valid_upto().checked_sub(n + 1).filter(|&o| o > 0).ok_or_else(|| {
            Error::range(format!("no valid annuli left for A_{n} on {} input annuli", f.valid_upto()))
        })?;
        let vn = self.grid.volume_at(n);
        let values = (1..=out)
            .map(|i| {
                let d = self.grid.midpoint(i);
                let lo = i.saturating_sub(n + 1).max(1);
                let hi = (i + n + 1).min(f.valid_upto());
                let mut s = 0.0;
                for j in lo..=hi {
                    s += self.grid.annular_intersection(j, n, d)? * f.at(j);
                }
                Ok(s / vn)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RadialFunction { values })
    }

    /// `M^dis f = max_{1 ≤ N ≤ N_max} A_N f`.
    pub fn maximal_dis(&self, f: &RadialFunction) -> Result<MaximalResult> {
        self.maximal_dis_upto(f, self.n_max)
    }

    /// `M^dis f` with the supremum truncated at `n_max ≤ self.n_max`.
    pub fn maximal_dis_upto(&self, f: &RadialFunction, n_max: usize) -> Result<MaximalResult> {
        self.check_input(f)?;
        if n_max == 0 || n_max > self.n_max {
            return Err(Error::range(format!("N_max = {n_max} outside 1..={}", self.n_max)));
        }
        let out = f.valid_upto().checked_sub(n_max + 1).filter(|&o| o > 0).ok_or_else(|| {
            Error::range(format!(
                "no valid annuli left for M^dis with N_max = {n_max} on {} input annuli",
                f.valid_upto()
            ))
        })?;
        let mut values = vec![f64::NEG_INFINITY; out];
        let mut argmax = vec![0; out];
        for n in 1..=n_max {
            let a = self.avg_rows(f, &self.kernels[n - 1], out);
            for i in 0..out {
                if a[i] > values[i] {
                    values[i] = a[i];
                    argmax[i] = n;
                }
            }
        }
        Ok(MaximalResult {
            values,
            argmax,
            n_max,
            valid_upto: out,
        })
    }

    /// `M_s^dis w = (M^dis(w^s))^{1/s}`; `s = 1` gives `M^dis w`.
    pub fn maximal_s(&self, w: &RadialFunction, s: f64) -> Result<RadialFunction> {
        if !(s >= 1.0 && s.is_finite()) {
            return Err(Error::domain(format!("power s = {s} must be at least 1")));
        }
        let m = self.maximal_dis(&w.powf(s))?;
        Ok(RadialFunction { values: m.values.iter().map(|v| v.powf(1.0 / s)).collect() })
    }

    /// `M^(k) w`, the discrete maximal operator applied `k` times.
    pub fn iterate_maximal(&self, w: &RadialFunction, k: usize) -> Result<MaximalResult> {
        if k == 0 {
            return Err(Error::domain("iteration count must be at least 1"));
        }
        let mut cur = self.maximal_dis(w)?;
        for _ in 1..k {
            cur = self.maximal_dis(&cur.function())?;
        }
        Ok(cur)
    }
}

/// `w({g > λ}) = Σ_{j : g_j > λ} w_j |Ω_j|` over the window of `g`.
pub fn distribution_mass(w: &Weight, g: &RadialFunction, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("level {lambda} must be positive")));
    }
    if g.valid_upto() > w.len() {
        return Err(Error::range("function window exceeds the weight's grid"));
    }
    Ok(g.values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > lambda)
        .map(|(i, _)| w.values[i] * w.grid.measure(i + 1))
        .sum())
}
