//! Radial weight families on the annular grid.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AnnularGrid;
use crate::specfun::{self, JacobiParams};

/// Largest per-point relative error accepted from special-function profiles.
pub const PROFILE_RTOL: f64 = 1e-8;

/// Declarative description of a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", deny_unknown_fields)]
pub enum WeightSpec {
    Constant,
    /// `e^{2ργ d}`.
    ExpRadial { gamma: f64 },
    /// `e^{2ρ(p-1) d}`.
    ExpStrong { p: f64 },
    /// Jacobi function `φ_{iκ}(d)`, `κ = 2ρ(p-1) + ϱ`, in the raw argument.
    SphericalU { p: f64 },
    /// `d^{2σ}/(1 + d^{2σ}) |Φ_{iθ}(d)|`, `θ = -2ργ - ϱ`, for `γ ∈ [-1/2, 0)`.
    JacobiV { gamma: f64 },
    /// The base weight times `e^{1/(1+d)}`.
    EtaProduct { base: Box<WeightSpec> },
    /// Log-linear interpolation of positive samples `(d, w)` sorted by `d`,
    /// held constant outside the sampled range.
    Custom { points: Vec<(f64, f64)> },
}

/// Continuum radial profile `d ↦ w(d)`.
#[derive(Clone)]
pub struct Profile(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Profile {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile(Arc::new(f))
    }

    pub fn eval(&self, d: f64) -> f64 {
        (self.0)(d)
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Profile(..)")
    }
}

/// A positive function on the annuli, sampled at midpoints.
#[derive(Debug, Clone)]
pub struct Weight {
    pub grid: Arc<AnnularGrid>,
    /// `w_j` stored at index `j - 1`.
    pub values: Vec<f64>,
    /// Relative error estimate of each value.
    pub errors: Vec<f64>,
    pub profile: Option<Profile>,
    /// Caveats raised while materializing (sign changes, large error bounds).
    pub notes: Vec<String>,
}

fn exp_profile(rate: f64) -> Profile {
    Profile::new(move |d| (rate * d).exp())
}

fn eta(d: f64) -> f64 {
    (1.0 / (1.0 + d)).exp()
}

fn custom_profile(points: &[(f64, f64)]) -> Result<Profile> {
    if points.is_empty() {
        return Err(Error::domain("custom weight needs at least one sample"));
    }
    if points.iter().any(|&(d, w)| !(d.is_finite() && d >= 0.0 && w.is_finite() && w > 0.0)) {
        return Err(Error::domain("custom weight samples must be finite with positive values"));
    }
    if points.windows(2).any(|p| p[1].0 <= p[0].0) {
        return Err(Error::domain("custom weight abscissae must be strictly increasing"));
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|&(d, w)| (d, w.ln())).collect();
    Ok(Profile::new(move |d| {
        let k = pts.partition_point(|p| p.0 <= d);
        if k == 0 {
            return pts[0].1.exp();
        }
        if k == pts.len() {
            return pts[k - 1].1.exp();
        }
        let (d0, l0) = pts[k - 1];
        let (d1, l1) = pts[k];
        (l0 + (l1 - l0) * (d - d0) / (d1 - d0)).exp()
    }))
}

impl WeightSpec {
    /// Samples the weight at the annulus midpoints.
    pub fn materialize(&self, grid: &Arc<AnnularGrid>) -> Result<Weight> {
        let sp = grid.params;
        let rho = sp.rho;
        let mids = &grid.midpoints;
        let n = grid.j_max;
        let mut notes = Vec::new();
        let (values, errors, profile) = match self {
            WeightSpec::Constant => (vec![1.0; n], vec![0.0; n], Profile::new(|_| 1.0)),
            WeightSpec::ExpRadial { gamma } => {
                let pr = exp_profile(2.0 * rho * gamma);
                (mids.iter().map(|&d| pr.eval(d)).collect(), vec![f64::EPSILON; n], pr)
            }
            WeightSpec::ExpStrong { p } => {
                if !(*p > 1.0) {
                    return Err(Error::domain(format!("ExpStrong needs p > 1, got {p}")));
                }
                let pr = exp_profile(2.0 * rho * (p - 1.0));
                (mids.iter().map(|&d| pr.eval(d)).collect(), vec![f64::EPSILON; n], pr)
            }
            WeightSpec::SphericalU { p } => {
                if !(*p > 1.0) {
                    return Err(Error::domain(format!("SphericalU needs p > 1, got {p}")));
                }
                let kappa = 2.0 * rho * (p - 1.0) + sp.varrho;
                let jp = JacobiParams::from_space(&sp, Complex64::new(0.0, kappa))?;
                let tr = specfun::jacobi_phi_trace(&jp, mids)?;
                let values = tr.values.iter().map(|v| v.re).collect();
                let pr = Profile::new(move |d| {
                    specfun::jacobi_phi(&jp, d).map(|v| v.re).unwrap_or(f64::NAN)
                });
                (values, tr.errors, pr)
            }
            WeightSpec::JacobiV { gamma } => {
                if !(-0.5..0.0).contains(gamma) {
                    return Err(Error::domain(format!("JacobiV needs gamma in [-1/2, 0), got {gamma}")));
                }
                if !(sp.sigma > 0.0) {
                    return Err(Error::domain("JacobiV needs sigma > 0"));
                }
                let theta = -2.0 * rho * gamma - sp.varrho;
                let jp = JacobiParams::from_space(&sp, Complex64::new(0.0, theta))?;
                let tr = specfun::jacobi_phi_second_trace(&jp, mids)?;
                let two_sigma = 2.0 * sp.sigma;
                let pre = move |d: f64| {
                    let a = d.powf(two_sigma);
                    a / (1.0 + a)
                };
                if tr.values.iter().any(|v| v.re < 0.0) {
                    notes.push(format!(
                        "Phi_(i theta), theta = {theta}, is negative near the origin; its modulus is used"
                    ));
                }
                let values = mids
                    .iter()
                    .zip(&tr.values)
                    .map(|(&d, v)| pre(d) * v.norm())
                    .collect();
                let pr = Profile::new(move |d| {
                    if d <= 0.0 {
                        return f64::NAN;
                    }
                    specfun::jacobi_phi_second(&jp, d).map(|v| pre(d) * v.norm()).unwrap_or(f64::NAN)
                });
                (values, tr.errors, pr)
            }
            WeightSpec::EtaProduct { base } => {
                let b = base.materialize(grid)?;
                notes.extend(b.notes);
                let values = b.values.iter().zip(mids).map(|(w, &d)| w * eta(d)).collect();
                let profile = b.profile.map(|bp| Profile::new(move |d| bp.eval(d) * eta(d)));
                return finish(grid, values, b.errors, profile, notes);
            }
            WeightSpec::Custom { points } => {
                let pr = custom_profile(points)?;
                (mids.iter().map(|&d| pr.eval(d)).collect(), vec![0.0; n], pr)
            }
        };
        finish(grid, values, errors, Some(profile), notes)
    }
}

fn finish(
    grid: &Arc<AnnularGrid>,
    values: Vec<f64>,
    errors: Vec<f64>,
    profile: Option<Profile>,
    mut notes: Vec<String>,
) -> Result<Weight> {
    if let Some(j) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Range(format!(
            "weight value {} at annulus {} is not finite and positive",
            values[j],
            j + 1
        )));
    }
    if let Some(j) = errors.iter().position(|e| !(*e <= PROFILE_RTOL)) {
        notes.push(format!(
            "annulus {} carries a relative error bound {:e} above {PROFILE_RTOL:e}",
            j + 1,
            errors[j]
        ));
    }
    Ok(Weight {
        grid: Arc::clone(grid),
        values,
        errors,
        profile,
        notes,
    })
}

impl Weight {
    /// Wraps annulus values without a continuum profile.
    pub fn from_values(grid: &Arc<AnnularGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.j_max {
            return Err(Error::domain(format!(
                "expected {} annulus values, got {}",
                grid.j_max,
                values.len()
            )));
        }
        let n = values.len();
        finish(grid, values, vec![0.0; n], None, Vec::new())
    }

    /// Builds a weight from a continuum profile sampled at the midpoints.
    pub fn from_profile(grid: &Arc<AnnularGrid>, profile: Profile) -> Result<Self> {
        let values = grid.midpoints.iter().map(|&d| profile.eval(d)).collect();
        finish(grid, values, vec![0.0; grid.j_max], Some(profile), Vec::new())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `w_j`.
    pub fn at(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    /// `w(E) = Σ_{j∈E} w_j |Ω_j|`; repeated indices count once.
    pub fn mass(&self, set: &[usize]) -> Result<f64> {
        let mut idx = set.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let mut total = 0.0;
        for j in idx {
            if j == 0 || j > self.len() {
                return Err(Error::range(format!("annulus {j} outside 1..={}", self.len())));
            }
            total += self.at(j) * self.grid.measure(j);
        }
        Ok(total)
    }

    /// Pointwise power `w^s`.
    pub fn power(&self, s: f64) -> Result<Weight> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!("power exponent {s} must be positive")));
        }
        let values = self.values.iter().map(|v| v.powf(s)).collect();
        let errors = self.errors.iter().map(|e| e * s).collect();
        let profile = self.profile.clone().map(|p| Profile::new(move |d| p.eval(d).powf(s)));
        finish(&self.grid, values, errors, profile, self.notes.clone())
    }

    /// Pointwise product with another weight on the same grid.
    pub fn times(&self, other: &Weight) -> Result<Weight> {
        if self.len() != other.len() {
            return Err(Error::domain("weights live on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        let errors = self.errors.iter().zip(&other.errors).map(|(a, b)| a + b).collect();
        let profile = match (&self.profile, &other.profile) {
            (Some(a), Some(b)) => {
                let (a, b) = (a.clone(), b.clone());
                Some(Profile::new(move |d| a.eval(d) * b.eval(d)))
            }
            _ => None,
        };
        let mut notes = self.notes.clone();
        notes.extend(other.notes.iter().cloned());
        finish(&self.grid, values, errors, profile, notes)
    }

    /// Continuum value, when a profile is attached.
    pub fn profile_at(&self, d: f64) -> Option<f64> {
        self.profile.as_ref().map(|p| p.eval(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit;
    use crate::geometry::SpaceParams;

    fn grid(j: usize) -> Arc<AnnularGrid> {
        Arc::new(AnnularGrid::new(SpaceParams::canonical(), j).unwrap())
    }

    fn slope(w: &Weight, lo: usize, hi: usize) -> f64 {
        let x: Vec<f64> = (lo..=hi).map(|j| j as f64).collect();
        let y: Vec<f64> = (lo..=hi).map(|j| w.at(j)).collect();
        fit::log_slope(&x, &y).unwrap().slope
    }

    #[test]
    fn constant_and_exponential() {
        let g = grid(30);
        let c = WeightSpec::Constant.materialize(&g).unwrap();
        assert!(c.values.iter().all(|&v| v == 1.0));
        let w = WeightSpec::ExpRadial { gamma: -0.75 }.materialize(&g).unwrap();
        assert!((w.at(10) / (-14.25f64).exp() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn midpoint_agreement() {
        let g = grid(30);
        for spec in [
            WeightSpec::ExpStrong { p: 2.0 },
            WeightSpec::SphericalU { p: 2.0 },
            WeightSpec::JacobiV { gamma: -0.3 },
            WeightSpec::EtaProduct { base: Box::new(WeightSpec::ExpRadial { gamma: -0.5 }) },
        ] {
            let w = spec.materialize(&g).unwrap();
            for j in [1, 2, 7, 30] {
                let d = g.midpoint(j);
                assert!((w.profile_at(d).unwrap() / w.at(j) - 1.0).abs() < 1e-12, "{spec:?} j={j}");
            }
        }
    }

    #[test]
    fn family_rates() {
        let g = grid(30);
        let us = WeightSpec::SphericalU { p: 2.0 }.materialize(&g).unwrap();
        let es = WeightSpec::ExpStrong { p: 2.0 }.materialize(&g).unwrap();
        assert!((slope(&us, 15, 25) - 2.0).abs() < 0.04);
        assert!((slope(&us, 15, 25) / slope(&es, 15, 25) - 1.0).abs() < 0.03);
        assert!(us.errors.iter().all(|&e| e < PROFILE_RTOL));
        for gamma in [-0.3, -0.4] {
            let v = WeightSpec::JacobiV { gamma }.materialize(&g).unwrap();
            assert!((slope(&v, 15, 25) / (2.0 * gamma) - 1.0).abs() < 0.03);
            assert!(v.errors.iter().all(|&e| e < PROFILE_RTOL));
        }
    }

    #[test]
    fn jacobi_v_sign_change_is_reported() {
        let v = WeightSpec::JacobiV { gamma: -0.3 }.materialize(&grid(10)).unwrap();
        assert!(v.notes.iter().any(|n| n.contains("negative")));
    }

    #[test]
    fn jacobi_v_domain() {
        let g = grid(10);
        assert!(WeightSpec::JacobiV { gamma: -0.6 }.materialize(&g).is_err());
        assert!(WeightSpec::JacobiV { gamma: 0.0 }.materialize(&g).is_err());
        // θ = -1 puts λ on a pole of the second solution.
        assert!(matches!(
            WeightSpec::JacobiV { gamma: -0.5 }.materialize(&g),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn eta_band() {
        let g = grid(30);
        let base = WeightSpec::ExpRadial { gamma: -0.5 }.materialize(&g).unwrap();
        let w = WeightSpec::EtaProduct { base: Box::new(WeightSpec::ExpRadial { gamma: -0.5 }) }
            .materialize(&g)
            .unwrap();
        for j in 1..=30 {
            let r = w.at(j) / base.at(j);
            assert!((1.0..=std::f64::consts::E).contains(&r));
        }
    }

    #[test]
    fn masses() {
        let g = grid(40);
        let c = WeightSpec::Constant.materialize(&g).unwrap();
        assert_eq!(c.mass(&[]).unwrap(), 0.0);
        assert_eq!(c.mass(&[7]).unwrap(), g.measure(7));
        assert!(c.mass(&[41]).is_err());
        let w = WeightSpec::ExpRadial { gamma: -1.0 }.materialize(&g).unwrap();
        let m: Vec<f64> = (1..=40).map(|j| w.mass(&[j]).unwrap()).collect();
        let (lo, hi) = m.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo > 0.05 && hi < 1.0, "{lo} {hi}");
        let a = w.mass(&[3, 5]).unwrap();
        assert!((a - w.mass(&[3]).unwrap() - w.mass(&[5]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn powers() {
        let g = grid(30);
        let w = WeightSpec::SphericalU { p: 1.5 }.materialize(&g).unwrap();
        assert_eq!(w.power(1.0).unwrap().values, w.values);
        let back = w.power(3.0).unwrap().power(1.0 / 3.0).unwrap();
        for (a, b) in back.values.iter().zip(&w.values) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        let e = WeightSpec::ExpRadial { gamma: -0.4 }.materialize(&g).unwrap();
        assert!((slope(&e.power(2.5).unwrap(), 1, 30) + 2.0 * 0.4 * 2.5).abs() < 1e-10);
    }

    #[test]
    fn spec_json_roundtrip() {
        let s = WeightSpec::EtaProduct { base: Box::new(WeightSpec::ExpStrong { p: 2.0 }) };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<WeightSpec>(&j).unwrap(), s);
        assert!(serde_json::from_str::<WeightSpec>(r#"{"variant":"ExpRadial","gamma":1,"x":2}"#).is_err());
    }
}
