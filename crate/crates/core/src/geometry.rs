//! Radial metric-measure model: volume density, balls, unit annuli and the
//! ball-overlap kernel between annuli.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Relative tolerance used for every volume integral.
pub const VOLUME_RTOL: f64 = 1e-12;

/// Largest exponent allowed in kernel entries before `f64` overflow becomes a risk.
const EXP_GUARD: f64 = 700.0;

/// Dimensional data of the space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    /// Dimension of the first layer, when built from `(m, k)`.
    pub m: Option<u32>,
    /// Dimension of the centre, when built from `(m, k)`.
    pub k: Option<u32>,
    pub sigma: f64,
    pub tau: f64,
    /// Homogeneous dimension.
    pub q: f64,
    pub rho: f64,
    /// Topological dimension `2σ + 2`.
    pub ell: f64,
    pub varrho: f64,
}

impl SpaceParams {
    /// Builds the parameters of a space with `dim v = m`, `dim z = k`.
    pub fn from_mk(m: u32, k: u32) -> Result<Self> {
        if m == 0 || !m.is_multiple_of(2) {
            return Err(Error::domain(format!("m = {m} must be a positive even integer")));
        }
        if k == 0 {
            return Err(Error::domain(
                "k = 0 gives tau = -1/2, outside the admissible range tau > -1/2",
            ));
        }
        let sigma = f64::from(m + k - 1) / 2.0;
        let tau = f64::from(k - 1) / 2.0;
        let q = f64::from(m) / 2.0 + f64::from(k);
        Ok(SpaceParams {
            m: Some(m),
            k: Some(k),
            sigma,
            tau,
            q,
            rho: q / 2.0,
            ell: f64::from(m + k + 1),
            varrho: sigma + tau + 1.0,
        })
    }

    /// Builds the parameters directly from Jacobi indices.
    pub fn from_jacobi(sigma: f64, tau: f64) -> Result<Self> {
        if !(sigma.is_finite() && tau.is_finite()) || !(sigma >= tau && tau > -0.5) {
            return Err(Error::domain(format!(
                "(sigma, tau) = ({sigma}, {tau}) violates sigma >= tau > -1/2"
            )));
        }
        let varrho = sigma + tau + 1.0;
        Ok(SpaceParams {
            m: None,
            k: None,
            sigma,
            tau,
            q: varrho,
            rho: varrho / 2.0,
            ell: 2.0 * sigma + 2.0,
            varrho,
        })
    }

    /// The default space `(m, k) = (2, 1)`, with `ρ = 1` and `ℓ = 4`.
    pub fn canonical() -> Self {
        Self::from_mk(2, 1).expect("canonical parameters are valid")
    }

    /// Logarithm of the volume density at radius `t > 0`.
    pub fn log_density(&self, t: f64) -> f64 {
        let h = 0.5 * t;
        let ls = if h > 20.0 {
            h + (-(-2.0 * h).exp()).ln_1p()
        } else {
            (2.0 * h.sinh()).ln()
        };
        let lc = h - std::f64::consts::LN_2 + (-2.0 * h).exp().ln_1p();
        (2.0 * self.sigma + 1.0) * ls + (2.0 * self.tau + 1.0) * lc
    }

    /// Radial volume density `(2 sinh(t/2))^(2σ+1) (cosh(t/2))^(2τ+1)`.
    pub fn density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.log_density(t).exp()
    }

    /// Volume of a ball of radius `r`.
    pub fn volume(&self, r: f64) -> f64 {
        self.volume_with_tol(r, VOLUME_RTOL)
    }

    /// Volume of a ball of radius `r`, integrated to relative tolerance `rtol`.
    pub fn volume_with_tol(&self, r: f64, rtol: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        // Unit pieces keep each integrand's dynamic range small.
        let mut total = 0.0;
        let mut a = 0.0;
        while a < r {
            let b = (a + 1.0).min(r);
            total += quad::integrate(|t| self.density(t), a, b, rtol, 0.0)
                .expect("density is smooth on bounded intervals")
                .value;
            a = b;
        }
        total
    }

    /// Clamp model of the measure of the intersection of balls of radii
    /// `s`, `t` whose centres are `d` apart.
    pub fn ball_intersection(&self, s: f64, t: f64, d: f64) -> f64 {
        if d >= s + t {
            return 0.0;
        }
        let vmin = self.volume(s).min(self.volume(t));
        if d <= (s - t).abs() {
            return vmin;
        }
        vmin.min((self.rho * (s + t - d)).exp())
    }
}

/// Unit-width annuli `Ω_j = B(e, j) \ B(e, j-1)` for `j = 1..=J_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnularGrid {
    pub params: SpaceParams,
    pub j_max: usize,
    /// `|Ω_j|` stored at index `j - 1`.
    pub measures: Vec<f64>,
    /// Representative distances `D_j = j - 1/2`, stored at index `j - 1`.
    pub midpoints: Vec<f64>,
    /// `V(n)` for `n = 0..=J_max`.
    pub volumes: Vec<f64>,
}

impl AnnularGrid {
    pub fn new(params: SpaceParams, j_max: usize) -> Result<Self> {
        if j_max == 0 {
            return Err(Error::range("J_max must be positive"));
        }
        if 2.0 * params.rho * j_max as f64 > EXP_GUARD {
            return Err(Error::range(format!(
                "J_max = {j_max} overflows the annulus measures at rho = {}",
                params.rho
            )));
        }
        let measures: Vec<f64> = (1..=j_max)
            .map(|j| {
                quad::integrate(|t| params.density(t), (j - 1) as f64, j as f64, VOLUME_RTOL, 0.0)
                    .expect("density is smooth on bounded intervals")
                    .value
            })
            .collect();
        let mut volumes = Vec::with_capacity(j_max + 1);
        volumes.push(0.0);
        let mut acc = 0.0;
        for m in &measures {
            acc += m;
            volumes.push(acc);
        }
        let midpoints = (1..=j_max).map(|j| j as f64 - 0.5).collect();
        Ok(AnnularGrid {
            params,
            j_max,
            measures,
            midpoints,
            volumes,
        })
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.j_max {
            return Err(Error::range(format!("annulus {j} outside 1..={}", self.j_max)));
        }
        Ok(())
    }

    /// `|Ω_j|`.
    pub fn measure(&self, j: usize) -> f64 {
        self.measures[j - 1]
    }

    /// `D_j = j - 1/2`.
    pub fn midpoint(&self, j: usize) -> f64 {
        self.midpoints[j - 1]
    }

    /// `V(n)` for an integer radius within the grid.
    pub fn volume_at(&self, n: usize) -> f64 {
        self.volumes[n]
    }

    /// Model of `|Ω_j ∩ B(x, N)|` for a centre `x` at distance `D` from the origin.
    pub fn annular_intersection(&self, j: usize, n: usize, d: f64) -> Result<f64> {
        self.check_index(j)?;
        if n == 0 {
            return Err(Error::range("scale N must be at least 1"));
        }
        if !(d >= 0.0) {
            return Err(Error::domain(format!("distance {d} must be nonnegative")));
        }
        let (jf, nf) = (j as f64, n as f64);
        if jf - 1.0 >= d + nf || d >= jf + nf {
            return Ok(0.0);
        }
        let omega = self.measure(j);
        if jf + d <= nf {
            return Ok(omega);
        }
        let vn = if n <= self.j_max {
            self.volume_at(n)
        } else {
            self.params.volume(nf)
        };
        Ok(omega.min(vn).min(self.annular_clamp_free(j, n, d)))
    }

    /// The unclamped overlap rate `e^{ρ(N + j - D)}`.
    pub fn annular_clamp_free(&self, j: usize, n: usize, d: f64) -> f64 {
        (self.params.rho * (n as f64 + j as f64 - d)).exp()
    }

    /// Builds the overlap kernel at scale `n`, unnormalized.
    pub fn product_kernel(&self, n: usize) -> Result<ProductKernel> {
        if n == 0 || n + 1 > self.j_max {
            return Err(Error::range(format!(
                "scale N = {n} outside 1..={}",
                self.j_max.saturating_sub(1)
            )));
        }
        let rho = self.params.rho;
        if rho * (n + 2 * self.j_max) as f64 > EXP_GUARD {
            return Err(Error::range(format!(
                "kernel at N = {n}, J_max = {} overflows",
                self.j_max
            )));
        }
        let vn = self.volume_at(n);
        let band = n + 1;
        let rows = (1..=self.j_max)
            .map(|i| {
                let lo = i.saturating_sub(band).max(1);
                let hi = (i + band).min(self.j_max);
                let oi = self.measure(i);
                let vals = (lo..=hi)
                    .map(|j| {
                        let oj = self.measure(j);
                        (oi * oj)
                            .min(oi * vn)
                            .min(oj * vn)
                            .min((rho * (n + i + j) as f64).exp())
                    })
                    .collect();
                KernelRow { lo, vals }
            })
            .collect();
        Ok(ProductKernel {
            n,
            j_max: self.j_max,
            rows,
            scale: vec![1.0; self.j_max],
            mode: Normalization::Off,
            c_n: 1.0,
        })
    }
}

/// How a kernel is rescaled so that averages of constants stay bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Off,
    /// Divide by one scalar, the median interior row mass.
    #[default]
    Scalar,
    /// Symmetric diagonal scaling `D P D` with every row mass exactly `V(N)|Ω_i|`.
    ExactMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KernelRow {
    lo: usize,
    vals: Vec<f64>,
}

/// Banded symmetric matrix of pairwise ball-overlap masses between annuli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductKernel {
    pub n: usize,
    pub j_max: usize,
    rows: Vec<KernelRow>,
    /// Diagonal factors `d_i` (all 1 except in exact-mass mode).
    scale: Vec<f64>,
    pub mode: Normalization,
    /// Scalar divisor `c_N` (1 unless scalar mode).
    pub c_n: f64,
}

impl ProductKernel {
    /// Half-width of the band: entries vanish for `|i - j| > N + 1`.
    pub fn bandwidth(&self) -> usize {
        self.n + 1
    }

    /// Column range `(lo, hi)` of row `i`, inclusive.
    pub fn row_range(&self, i: usize) -> (usize, usize) {
        let r = &self.rows[i - 1];
        (r.lo, r.lo + r.vals.len() - 1)
    }

    /// `P_N(i, j)`, zero outside the band or grid.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == 0 || j == 0 || i > self.j_max || j > self.j_max {
            return 0.0;
        }
        let r = &self.rows[i - 1];
        if j < r.lo || j >= r.lo + r.vals.len() {
            return 0.0;
        }
        r.vals[j - r.lo] * (self.scale[i - 1] * self.scale[j - 1]) / self.c_n
    }

    /// Iterates over the nonzero entries `(j, P_N(i, j))` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = &self.rows[i - 1];
        let si = self.scale[i - 1];
        r.vals
            .iter()
            .enumerate()
            .map(move |(o, v)| (r.lo + o, v * (si * self.scale[r.lo + o - 1]) / self.c_n))
    }

    /// `Σ_j P_N(i, j)`.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    /// Rows whose band is not cut by either end of the grid.
    pub fn interior_rows(&self) -> std::ops::RangeInclusive<usize> {
        let b = self.bandwidth();
        (b + 1)..=self.j_max.saturating_sub(b)
    }

    /// Rescales the kernel in place.
    pub fn normalize(&mut self, grid: &AnnularGrid, mode: Normalization) -> Result<()> {
        self.scale.iter_mut().for_each(|s| *s = 1.0);
        self.c_n = 1.0;
        self.mode = Normalization::Off;
        let vn = grid.volume_at(self.n);
        match mode {
            Normalization::Off => {}
            Normalization::Scalar => {
                let mut ratios: Vec<f64> = self
                    .interior_rows()
                    .map(|i| self.row_sum(i) / (vn * grid.measure(i)))
                    .collect();
                if ratios.is_empty() {
                    let last = self.j_max - self.bandwidth();
                    ratios = (1..=last.max(1))
                        .map(|i| self.row_sum(i) / (vn * grid.measure(i)))
                        .collect();
                }
                self.c_n = median(&mut ratios);
            }
            Normalization::ExactMass => {
                let target: Vec<f64> = (1..=self.j_max).map(|i| vn * grid.measure(i)).collect();
                let mut d: Vec<f64> = (1..=self.j_max)
                    .map(|i| (target[i - 1] / self.row_sum(i)).sqrt())
                    .collect();
                let mut converged = false;
                for _ in 0..10_000 {
                    self.scale.copy_from_slice(&d);
                    let mut worst: f64 = 0.0;
                    for i in 1..=self.j_max {
                        let m = self.row_sum(i);
                        worst = worst.max((m / target[i - 1] - 1.0).abs());
                        d[i - 1] *= (target[i - 1] / m).sqrt();
                    }
                    if worst < 1e-14 {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::Precision("exact-mass scaling did not converge".into()));
                }
            }
        }
        self.mode = mode;
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit;

    fn sinh4(r: f64) -> f64 {
        4.0 * (r / 2.0).sinh().powi(4)
    }

    #[test]
    fn canonical_identities() {
        let p = SpaceParams::canonical();
        assert_eq!((p.sigma, p.tau, p.rho, p.ell, p.varrho, p.q), (1.0, 0.0, 1.0, 4.0, 2.0, 2.0));
        for (m, k) in [(2, 1), (4, 3), (8, 7), (6, 2)] {
            let p = SpaceParams::from_mk(m, k).unwrap();
            assert_eq!(p.varrho, p.q);
            assert_eq!(p.q, 2.0 * p.rho);
            assert_eq!(p.ell, 2.0 * p.sigma + 2.0);
        }
    }

    #[test]
    fn rejects_inadmissible() {
        assert!(SpaceParams::from_mk(3, 1).is_err());
        assert!(SpaceParams::from_mk(2, 0).is_err());
        assert!(SpaceParams::from_jacobi(0.0, 0.5).is_err());
        assert!(SpaceParams::from_jacobi(1.0, -0.5).is_err());
    }

    #[test]
    fn density_limits() {
        let p = SpaceParams::canonical();
        assert_eq!(p.density(0.0), 0.0);
        let t = 1e-3;
        assert!((p.density(t) / t.powi(3) - 1.0).abs() < 1e-5);
        let slope = (p.log_density(40.0) - p.log_density(30.0)) / 10.0;
        assert!((slope - 2.0).abs() < 1e-10);
        let direct = (2.0 * (1.7f64).sinh()).powi(3) * 1.7f64.cosh();
        assert!((p.density(3.4) / direct - 1.0).abs() < 1e-13);
    }

    #[test]
    fn volume_closed_form() {
        let p = SpaceParams::from_jacobi(1.0, 0.0).unwrap();
        for r in [0.1, 0.5, 1.0, 3.7, 10.0, 25.0, 50.0] {
            assert!((p.volume(r) / sinh4(r) - 1.0).abs() < 1e-11, "r={r}");
        }
    }

    #[test]
    fn volume_small_and_large() {
        let p = SpaceParams::canonical();
        let r = 0.5;
        let ratio = p.volume(r) / r.powf(p.ell) * p.ell;
        assert!((0.8..=1.3).contains(&ratio));
        let q = p.volume(21.0) / p.volume(20.0);
        assert!((q / std::f64::consts::E.powi(2) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grid_rates() {
        let g = AnnularGrid::new(SpaceParams::canonical(), 40).unwrap();
        let js: Vec<f64> = (15..=30).map(f64::from).collect();
        let om: Vec<f64> = (15..=30).map(|j| g.measure(j)).collect();
        let f = fit::log_slope(&js, &om).unwrap();
        assert!((f.slope - 2.0).abs() < 0.02);
        // log|Ω_j| = 2j - ln 4 + ln(1 - e^-2) + o(1), so the ratio enters
        // [0.95, 1.05] at j = 16 and sits at 0.949 for j = 15.
        let r15 = g.measure(15).ln() / 30.0;
        assert!((0.948..0.95).contains(&r15));
        for j in 16..=40 {
            let r = g.measure(j).ln() / (2.0 * j as f64);
            assert!((0.95..=1.05).contains(&r));
        }
        assert!((g.volume_at(7) - sinh4(7.0)).abs() / sinh4(7.0) < 1e-11);
    }

    #[test]
    fn ball_intersection_cases() {
        let p = SpaceParams::canonical();
        assert_eq!(p.ball_intersection(2.0, 3.0, 5.0), 0.0);
        assert_eq!(p.ball_intersection(2.0, 3.0, 0.0), p.volume(2.0));
        let v = p.ball_intersection(10.0, 10.0, 10.0);
        assert!((v - 10f64.exp()).abs() < 1e-9 * v);
    }

    #[test]
    fn annular_cases() {
        let g = AnnularGrid::new(SpaceParams::canonical(), 30).unwrap();
        assert_eq!(g.annular_intersection(5, 2, 10.0).unwrap(), 0.0);
        assert_eq!(g.annular_intersection(2, 3, 1e-9).unwrap(), g.measure(2));
        let (n, d) = (6, 10.0);
        let j = 13;
        let expect = g.annular_clamp_free(j, n, d);
        assert!((expect - (2.0 * n as f64 - 3.0).exp()).abs() < 1e-9 * expect);
        let v = g.annular_intersection(j, n, d).unwrap();
        assert_eq!(v, expect.min(g.measure(j)).min(g.volume_at(n)));
        assert!(g.annular_intersection(31, 2, 1.0).is_err());
    }

    #[test]
    fn kernel_band_and_symmetry() {
        let g = AnnularGrid::new(SpaceParams::canonical(), 40).unwrap();
        let k = g.product_kernel(5).unwrap();
        assert_eq!(k.get(10, 17), 0.0);
        assert_eq!(k.get(10, 18), 0.0);
        assert!(k.get(10, 16) > 0.0);
        for i in 1..=40 {
            for j in 1..=40 {
                assert_eq!(k.get(i, j), k.get(j, i));
            }
        }
        assert!(g.product_kernel(40).is_err());
        assert!(g.product_kernel(0).is_err());
    }

    #[test]
    fn kernel_normalizations() {
        let g = AnnularGrid::new(SpaceParams::canonical(), 60).unwrap();
        for n in [1, 5, 12] {
            let mut k = g.product_kernel(n).unwrap();
            k.normalize(&g, Normalization::Scalar).unwrap();
            for i in k.interior_rows() {
                let a = k.row_sum(i) / (g.volume_at(n) * g.measure(i));
                assert!((0.25..=4.0).contains(&a), "n={n} i={i} a={a}");
            }
            k.normalize(&g, Normalization::ExactMass).unwrap();
            for i in 1..=60 {
                let a = k.row_sum(i) / (g.volume_at(n) * g.measure(i));
                assert!((a - 1.0).abs() < 1e-12);
                for j in 1..=60 {
                    assert_eq!(k.get(i, j), k.get(j, i));
                }
            }
        }
    }
}
