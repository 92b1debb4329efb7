//! Jacobi functions `φ_λ^{(σ,τ)}` and the second solution `Φ_λ^{(σ,τ)}`.
//!
//! Both solve
//! `φ'' + ((2σ+1) coth t + (2τ+1) tanh t) φ' + (λ² + ϱ²) φ = 0`, `ϱ = σ+τ+1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hyp2f1::{hyp2f1, is_nonpositive_integer, SeriesValue};
use super::ode::{self, OdeOptions, OdeSample, State};
use super::{validate_grid, FunctionTrace, Method};
use crate::error::{Error, Result};
use crate::geometry::SpaceParams;

/// Above this point `φ` is continued by integrating the ODE.
pub const T_SWITCH: f64 = 0.6;
/// Start of the ODE integration, where the Taylor expansion is used.
pub const T0: f64 = 1e-3;
/// Below this point the series for `Φ` is replaced by backward integration.
pub const T_SECOND_SERIES: f64 = 0.35;
const T_SECOND_START: f64 = 0.5;
const H_MAX: f64 = 0.25;

const COTH: [f64; 4] = [1.0 / 3.0, -1.0 / 45.0, 2.0 / 945.0, -1.0 / 4725.0];
const TANH: [f64; 5] = [1.0, -1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0];

/// Jacobi indices and spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub sigma: f64,
    pub tau: f64,
    pub lambda: Complex64,
}

impl JacobiParams {
    pub fn new(sigma: f64, tau: f64, lambda: Complex64) -> Result<Self> {
        if !(sigma >= tau && tau > -0.5) {
            return Err(Error::domain(format!(
                "(sigma, tau) = ({sigma}, {tau}) violates sigma >= tau > -1/2"
            )));
        }
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::domain("lambda must be finite"));
        }
        Ok(JacobiParams { sigma, tau, lambda })
    }

    pub fn from_space(params: &SpaceParams, lambda: Complex64) -> Result<Self> {
        Self::new(params.sigma, params.tau, lambda)
    }

    pub fn varrho(&self) -> f64 {
        self.sigma + self.tau + 1.0
    }

    /// `λ² + ϱ²`.
    pub fn mu(&self) -> Complex64 {
        self.lambda * self.lambda + self.varrho() * self.varrho()
    }

    /// The same indices with `λ` replaced by `-λ`.
    pub fn negated(&self) -> Self {
        JacobiParams { lambda: -self.lambda, ..*self }
    }

    /// Coefficient of `φ'` in the ODE.
    pub fn drift(&self, t: f64) -> f64 {
        (2.0 * self.sigma + 1.0) / t.tanh() + (2.0 * self.tau + 1.0) * t.tanh()
    }

    fn rhs(&self) -> impl Fn(f64, &State) -> State + '_ {
        let mu = self.mu();
        move |t, y| [y[1], -y[1] * self.drift(t) - y[0] * mu]
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn ln_2cosh(t: f64) -> f64 {
    t + (-2.0 * t).exp().ln_1p()
}

/// Series value of `φ` and its derivative, valid for `sinh² t ≤ 0.9`.
fn phi_series(jp: &JacobiParams, t: f64) -> Result<(Complex64, Complex64, f64)> {
    let il = Complex64::i() * jp.lambda;
    let r = jp.varrho();
    let a = (il + r) * 0.5;
    let b = (-il + r) * 0.5;
    let cc = c(jp.sigma + 1.0);
    let z = c(-t.sinh().powi(2));
    let f: SeriesValue = hyp2f1(a, b, cc, z)?;
    let df = hyp2f1(a + 1.0, b + 1.0, cc + 1.0, z)?;
    let deriv = a * b / cc * df.value * (-(2.0 * t).sinh());
    Ok((f.value, deriv, f.abs_err / f.value.norm().max(f64::MIN_POSITIVE)))
}

/// Even Taylor coefficients of `φ` about the origin, `c_0 = 1`.
fn taylor_coefficients(jp: &JacobiParams) -> [Complex64; 6] {
    let aa = 2.0 * jp.sigma + 1.0;
    let bb = 2.0 * jp.tau + 1.0;
    let mu = jp.mu();
    let mut cs = [c(0.0); 6];
    cs[0] = c(1.0);
    for n in 1..6 {
        let mut rhs = -mu * cs[n - 1];
        for k in 1..=n {
            let d = 2.0 * (n - k) as f64;
            if d == 0.0 {
                continue;
            }
            if k <= COTH.len() {
                rhs -= cs[n - k] * (aa * COTH[k - 1] * d);
            }
            rhs -= cs[n - k] * (bb * TANH[k - 1] * d);
        }
        let nf = n as f64;
        cs[n] = rhs / (2.0 * nf * (2.0 * nf - 1.0) + 2.0 * nf * aa);
    }
    cs
}

fn taylor_start(jp: &JacobiParams, t: f64) -> State {
    let cs = taylor_coefficients(jp);
    let mut y = c(0.0);
    let mut dy = c(0.0);
    for (n, cn) in cs.iter().enumerate() {
        y += cn * t.powi(2 * n as i32);
        if n > 0 {
            dy += cn * (2.0 * n as f64) * t.powi(2 * n as i32 - 1);
        }
    }
    [y, dy]
}

/// Integrates `φ` from the origin through increasing outputs `> T0`.
fn phi_ode(jp: &JacobiParams, outputs: &[f64], h_max: f64) -> Result<Vec<OdeSample>> {
    let opts = OdeOptions { h_max, ..OdeOptions::default() };
    ode::integrate(jp.rhs(), T0, taylor_start(jp, T0), outputs, opts)
}

fn min_spacing(t: &[f64]) -> f64 {
    t.windows(2).map(|w| w[1] - w[0]).fold(H_MAX, f64::min)
}

/// `φ_λ(t)`.
pub fn jacobi_phi(jp: &JacobiParams, t: f64) -> Result<Complex64> {
    Ok(jacobi_phi_trace(jp, &[t])?.values[0])
}

/// `φ_λ` on an increasing grid: series up to [`T_SWITCH`], ODE beyond.
pub fn jacobi_phi_trace(jp: &JacobiParams, grid: &[f64]) -> Result<FunctionTrace> {
    validate_grid(grid)?;
    let split = grid.partition_point(|&t| t <= T_SWITCH);
    let mut values = Vec::with_capacity(grid.len());
    let mut errors = Vec::with_capacity(grid.len());
    let mut methods = Vec::with_capacity(grid.len());
    for &t in &grid[..split] {
        let (v, _, e) = phi_series(jp, t)?;
        values.push(v);
        errors.push(e);
        methods.push(Method::Series);
    }
    if split < grid.len() {
        // Uniform steps equal to the grid spacing keep finite differences of
        // the trace smooth.
        let h_max = min_spacing(grid) * (1.0 + 1e-9);
        for s in phi_ode(jp, &grid[split..], h_max)? {
            values.push(s.y[0]);
            errors.push(s.err / s.y[0].norm().max(f64::MIN_POSITIVE) + f64::EPSILON);
            methods.push(Method::Ode);
        }
    }
    Ok(FunctionTrace {
        t: grid.to_vec(),
        values,
        errors,
        methods,
    })
}

/// Relative gap between the series and the origin-started ODE at [`T_SWITCH`].
pub fn branch_gap(jp: &JacobiParams) -> Result<f64> {
    let (s, _, _) = phi_series(jp, T_SWITCH)?;
    let o = phi_ode(jp, &[T_SWITCH], H_MAX)?[0].y[0];
    Ok((s - o).norm() / s.norm())
}

fn check_second_pole(jp: &JacobiParams) -> Result<()> {
    let cc = Complex64::new(1.0, 0.0) - Complex64::i() * jp.lambda;
    if is_nonpositive_integer(cc) {
        return Err(Error::Pole(format!(
            "second solution undefined at lambda = {} (1 - i lambda is a nonpositive integer)",
            jp.lambda
        )));
    }
    Ok(())
}

/// Series value of `Φ` and its derivative for `t ≥ T_SECOND_SERIES`.
fn phi_second_series(jp: &JacobiParams, t: f64) -> Result<(Complex64, Complex64, f64)> {
    let il = Complex64::i() * jp.lambda;
    let r = jp.varrho();
    let a = (-il + r) * 0.5;
    let b = (-il + (jp.sigma - jp.tau + 1.0)) * 0.5;
    let cc = -il + 1.0;
    let ch = t.cosh();
    let z = c(1.0 / (ch * ch));
    let s = il - r;
    let pre = (s * ln_2cosh(t)).exp();
    let f = hyp2f1(a, b, cc, z)?;
    let df = hyp2f1(a + 1.0, b + 1.0, cc + 1.0, z)?;
    let th = t.tanh();
    let value = pre * f.value;
    let deriv = s * th * value + pre * (a * b / cc) * df.value * (-2.0 * z.re * th);
    Ok((value, deriv, f.abs_err / f.value.norm().max(f64::MIN_POSITIVE)))
}

/// `Φ_λ(t)` for `t > 0`.
pub fn jacobi_phi_second(jp: &JacobiParams, t: f64) -> Result<Complex64> {
    Ok(jacobi_phi_second_trace(jp, &[t])?.values[0])
}

/// `Φ_λ` on an increasing grid of positive points. Points below
/// [`T_SECOND_SERIES`] are reached by integrating the ODE backward from the
/// series value at `t = 0.5`.
pub fn jacobi_phi_second_trace(jp: &JacobiParams, grid: &[f64]) -> Result<FunctionTrace> {
    validate_grid(grid)?;
    check_second_pole(jp)?;
    if grid.first().is_some_and(|&t| t <= 0.0) {
        return Err(Error::domain("second solution needs t > 0"));
    }
    let split = grid.partition_point(|&t| t < T_SECOND_SERIES);
    let mut values = vec![c(0.0); grid.len()];
    let mut errors = vec![0.0; grid.len()];
    if split > 0 {
        let (v0, d0, e0) = phi_second_series(jp, T_SECOND_START)?;
        let outputs: Vec<f64> = grid[..split].iter().rev().copied().collect();
        let h_max = min_spacing(grid) * (1.0 + 1e-9);
        let opts = OdeOptions { h_max, ..OdeOptions::default() };
        let sol = ode::integrate(jp.rhs(), T_SECOND_START, [v0, d0], &outputs, opts)?;
        for (k, s) in sol.iter().enumerate() {
            let i = split - 1 - k;
            values[i] = s.y[0];
            errors[i] = e0 + s.err / s.y[0].norm().max(f64::MIN_POSITIVE);
        }
    }
    for i in split..grid.len() {
        let (v, _, e) = phi_second_series(jp, grid[i])?;
        values[i] = v;
        errors[i] = e;
    }
    Ok(FunctionTrace {
        t: grid.to_vec(),
        values,
        errors,
        methods: vec![Method::SecondSolution; grid.len()],
    })
}

/// Spherical function `φ_λ(d) = φ^{(σ,τ)}_{2λ}(d/2)` on a distance grid.
pub fn spherical_profile(params: &SpaceParams, lambda: Complex64, d_grid: &[f64]) -> Result<FunctionTrace> {
    let jp = JacobiParams::from_space(params, 2.0 * lambda)?;
    let half: Vec<f64> = d_grid.iter().map(|d| d / 2.0).collect();
    let mut tr = jacobi_phi_trace(&jp, &half)?;
    tr.t = d_grid.to_vec();
    Ok(tr)
}

/// Largest ODE residual of a trace, by central differences on its grid.
pub fn ode_residual(trace: &FunctionTrace, jp: &JacobiParams) -> Result<f64> {
    let n = trace.len();
    if n < 5 {
        return Err(Error::domain("residual needs at least 5 points"));
    }
    let t = &trace.t;
    if t[0] <= 0.05 {
        return Err(Error::domain("residual needs t > 0.05 at every point"));
    }
    let h = (t[n - 1] - t[0]) / (n - 1) as f64;
    if t.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
        return Err(Error::domain("residual needs a uniformly spaced grid"));
    }
    if h > 1e-2 {
        return Err(Error::Precision(format!("grid spacing {h} too coarse for the residual")));
    }
    let y = &trace.values;
    let mu = jp.mu();
    let mut worst: f64 = 0.0;
    // Fourth-order five-point central differences.
    for i in 2..n - 2 {
        let d2 = (-y[i + 2] + y[i + 1] * 16.0 - y[i] * 30.0 + y[i - 1] * 16.0 - y[i - 2])
            / (12.0 * h * h);
        let d1 = (-y[i + 2] + y[i + 1] * 8.0 - y[i - 1] * 8.0 + y[i - 2]) / (12.0 * h);
        let r = (d2 + d1 * jp.drift(t[i]) + mu * y[i]).norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit;
    use crate::specfun::uniform_grid;

    fn jp(s: f64, t: f64, re: f64, im: f64) -> JacobiParams {
        JacobiParams::new(s, t, Complex64::new(re, im)).unwrap()
    }

    #[test]
    fn value_at_origin() {
        let p = jp(1.0, 0.0, 1.3, 0.4);
        assert_eq!(jacobi_phi(&p, 0.0).unwrap(), c(1.0));
    }

    #[test]
    fn taylor_matches_series() {
        let p = jp(1.5, 0.5, 0.7, -0.2);
        let t = 0.05;
        let y = taylor_start(&p, t);
        let (v, d, _) = phi_series(&p, t).unwrap();
        assert!((y[0] - v).norm() < 1e-14);
        assert!((y[1] - d).norm() < 1e-13);
    }

    #[test]
    fn trivial_eigenvalue_is_constant() {
        // λ = iϱ makes λ² + ϱ² = 0, so φ ≡ 1.
        let p = jp(1.0, 0.0, 0.0, 2.0);
        let tr = jacobi_phi_trace(&p, &uniform_grid(0.1, 5.0, 1e-3)).unwrap();
        assert!(tr.values.iter().all(|v| (v - 1.0).norm() < 1e-12));
        assert!(ode_residual(&tr, &p).unwrap() < 1e-6);
    }

    #[test]
    fn even_in_lambda() {
        let p = jp(1.0, 0.0, 1.3, 0.0);
        let a = jacobi_phi(&p, 2.0).unwrap();
        let b = jacobi_phi(&p.negated(), 2.0).unwrap();
        assert!((a - b).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn branches_agree() {
        for (s, t) in [(1.0, 0.0), (1.5, 0.0), (2.0, 0.5)] {
            for (re, im) in [(0.0, 0.0), (1.0, 0.0), (0.0, 2.0), (2.5, -0.7)] {
                assert!(branch_gap(&jp(s, t, re, im)).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn corrupted_trace_is_detected() {
        let p = jp(1.0, 0.0, 1.0, 0.0);
        let mut tr = jacobi_phi_trace(&p, &uniform_grid(0.1, 3.0, 1e-3)).unwrap();
        assert!(ode_residual(&tr, &p).unwrap() < 1e-6);
        tr.values[1000] *= 1.01;
        assert!(ode_residual(&tr, &p).unwrap() > 1e-2);
    }

    #[test]
    fn residual_refines() {
        let p = jp(2.0, 0.5, 1.0, 0.0);
        let coarse = jacobi_phi_trace(&p, &uniform_grid(0.1, 10.0, 1e-2)).unwrap();
        let fine = jacobi_phi_trace(&p, &uniform_grid(0.1, 10.0, 5e-3)).unwrap();
        let (rc, rf) = (ode_residual(&coarse, &p).unwrap(), ode_residual(&fine, &p).unwrap());
        assert!(rc >= 3.0 * rf, "{rc} vs {rf}");
    }

    #[test]
    fn residual_preconditions() {
        let p = jp(1.0, 0.0, 1.0, 0.0);
        let tr = jacobi_phi_trace(&p, &uniform_grid(0.1, 1.0, 0.1)).unwrap();
        assert!(matches!(ode_residual(&tr, &p), Err(Error::Precision(_))));
        let tr = jacobi_phi_trace(&p, &uniform_grid(0.0, 0.01, 1e-3)).unwrap();
        assert!(ode_residual(&tr, &p).is_err());
    }

    #[test]
    fn growth_rate() {
        // κ = 2ρ(p-1) + ϱ with p = 2, (σ, τ) = (1, 0).
        let p = jp(1.0, 0.0, 0.0, 4.0);
        let ts = uniform_grid(15.0, 25.0, 0.5);
        let tr = jacobi_phi_trace(&p, &ts).unwrap();
        let ys: Vec<f64> = tr.values.iter().map(|v| v.re).collect();
        let f = fit::log_slope(&ts, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 0.04);
    }

    #[test]
    fn second_solution_branches_agree() {
        let p = jp(1.0, 0.0, 0.8, -0.3);
        let (v0, d0, _) = phi_second_series(&p, T_SECOND_START).unwrap();
        let back = ode::integrate(p.rhs(), T_SECOND_START, [v0, d0], &[0.4], OdeOptions::default())
            .unwrap()[0]
            .y[0];
        let series = phi_second_series(&p, 0.4).unwrap().0;
        assert!((back - series).norm() < 1e-11 * series.norm());
        let tr = jacobi_phi_second_trace(&p, &[0.2, 0.34, 0.36]).unwrap();
        assert_eq!(tr.values[2], jacobi_phi_second(&p, 0.36).unwrap());
        assert!(tr.values.iter().all(|v| v.norm().is_finite()));
    }

    #[test]
    fn second_solution_poles() {
        assert!(matches!(jacobi_phi_second(&jp(1.0, 0.0, 0.0, -1.0), 1.0), Err(Error::Pole(_))));
        assert!(matches!(jacobi_phi_second(&jp(1.0, 0.0, 0.0, -3.0), 1.0), Err(Error::Pole(_))));
        assert!(jacobi_phi_second(&jp(1.0, 0.0, 0.0, -1.4), 1.0).is_ok());
    }
}
