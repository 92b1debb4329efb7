use rayon::prelude::*;

use super::{need, Best, CheckReport, Condition, FamilySpec, SetFamily, Verdict, Witness};
use crate::error::{Error, Result};
use crate::fit;
use crate::quad::{self, gauss_legendre};
use crate::radialops::{RadialFunction, RadialModel};
use crate::weights::{Profile, Weight};

fn check_grid(model: &RadialModel, w: &Weight) -> Result<()> {
    if w.len() != model.j_max() {
        return Err(Error::domain(format!(
            "weight has {} annuli, model has {}",
            w.len(),
            model.j_max()
        )));
    }
    Ok(())
}

/// Product-measure condition
/// `sup_{N, E, F} Q_N(E,F) / (e^{2ρβN} w(E)^{α/p} w(F)^{1-α/p})` with
/// `Q_N(E,F) = Σ_{i∈E, j∈F} w_j P_N(i,j)`.
pub struct LargeScale<'a> {
    pub model: &'a RadialModel,
    pub w: &'a Weight,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n_max: usize,
    pub family: SetFamily,
    id: &'static str,
}

impl<'a> LargeScale<'a> {
    /// Requires `0 < β ≤ 1` and `β ≤ α < p`; sets live in `1..=J_max - N_max - 1`.
    pub fn new(
        model: &'a RadialModel,
        w: &'a Weight,
        p: f64,
        alpha: f64,
        beta: f64,
        family: &FamilySpec,
    ) -> Result<Self> {
        check_grid(model, w)?;
        if !(p > 1.0 && beta > 0.0 && beta <= 1.0 && beta <= alpha && alpha < p) {
            return Err(Error::domain(format!(
                "need 0 < beta <= 1, beta <= alpha < p, p > 1; got p = {p}, alpha = {alpha}, beta = {beta}"
            )));
        }
        let family = SetFamily::generate(family, model.valid_after(1))?;
        Ok(LargeScale {
            model,
            w,
            p,
            alpha,
            beta,
            n_max: model.n_max,
            family,
            id: "large-scale",
        })
    }

    /// The necessary condition: exponents `α = β = 1`.
    pub fn necessary(model: &'a RadialModel, w: &'a Weight, p: f64, family: &FamilySpec) -> Result<Self> {
        let mut c = Self::new(model, w, p, 1.0, 1.0, family)?;
        c.id = "necessary";
        Ok(c)
    }

    /// `Q_N(E, F)` for sorted index sets.
    pub fn q(&self, n: usize, e: &[usize], f: &[usize]) -> Result<f64> {
        let k = self.model.kernel(n)?;
        let mut total = 0.0;
        for &i in e {
            let (lo, hi) = k.row_range(i);
            let a = f.partition_point(|&j| j < lo);
            let b = f.partition_point(|&j| j <= hi);
            for &j in &f[a..b] {
                total += self.w.at(j) * k.get(i, j);
            }
        }
        Ok(total)
    }

    fn ratio(&self, n: usize, e: &[usize], f: &[usize], we: f64, wf: f64) -> Result<f64> {
        let q = self.q(n, e, f)?;
        let rho = self.model.grid.params.rho;
        let a = self.alpha / self.p;
        let log_den = 2.0 * rho * self.beta * n as f64 + a * we.ln() + (1.0 - a) * wf.ln();
        Ok((q.ln() - log_den).exp())
    }
}

impl Condition for LargeScale<'_> {
    fn id(&self) -> String {
        self.id.into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let n = need(wt.n, "N")?;
        let (we, wf) = (self.w.mass(&wt.e)?, self.w.mass(&wt.f)?);
        self.ratio(n, &wt.e, &wt.f, we, wf)
    }

    fn run(&self) -> Result<CheckReport> {
        let sets = &self.family.sets;
        let masses = sets.iter().map(|s| self.w.mass(s)).collect::<Result<Vec<_>>>()?;
        let best = (1..=self.n_max)
            .into_par_iter()
            .map(|n| {
                let mut best = Best::new();
                for (a, e) in sets.iter().enumerate() {
                    for (b, f) in sets.iter().enumerate() {
                        let r = self.ratio(n, e, f, masses[a], masses[b])?;
                        if r > 0.0 {
                            best.offer(r, || Witness {
                                n: Some(n),
                                e: e.clone(),
                                f: f.clone(),
                                ..Default::default()
                            });
                        }
                    }
                }
                Ok(best)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(Best::new(), Best::merge);
        Ok(best
            .finish(self.id())?
            .with_meta("p", self.p)
            .with_meta("alpha", self.alpha)
            .with_meta("beta", self.beta)
            .with_meta("n_max", self.n_max)
            .with_meta("window", self.family.window)
            .with_meta("family", &self.family.spec)
            .with_meta("family_size", self.family.len()))
    }
}

/// Pointwise sufficient condition
/// `sup_{i, j, N : |i-j| ≤ N} w_i |Ω_i ∩ B(x_j, N)| / (e^{ρ(N+i-j)(p-η)} e^{2ρNη} w_j)`.
pub struct EasyCheck<'a> {
    pub model: &'a RadialModel,
    pub w: &'a Weight,
    pub p: f64,
    pub eta: f64,
}

impl<'a> EasyCheck<'a> {
    pub fn new(model: &'a RadialModel, w: &'a Weight, p: f64, eta: f64) -> Result<Self> {
        check_grid(model, w)?;
        if !(eta < 1.0 && p > 1.0) {
            return Err(Error::domain(format!("need eta < 1 and p > 1, got eta = {eta}, p = {p}")));
        }
        Ok(EasyCheck { model, w, p, eta })
    }

    /// Exponents certified by a finite constant: `(p/(p+1-η), p/(p+1-η))`.
    pub fn certified(&self) -> (f64, f64) {
        let a = self.p / (self.p + 1.0 - self.eta);
        (a, a)
    }

    fn term(&self, i: usize, j: usize, n: usize) -> Result<f64> {
        let g = &self.model.grid;
        let rho = g.params.rho;
        let x = g.annular_intersection(i, n, g.midpoint(j))?;
        let shift = n as f64 + i as f64 - j as f64;
        let log_den = rho * shift * (self.p - self.eta) + 2.0 * rho * n as f64 * self.eta;
        Ok((self.w.at(i) / self.w.at(j)) * (x.ln() - log_den).exp())
    }
}

impl Condition for EasyCheck<'_> {
    fn id(&self) -> String {
        "easy-check".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let n = need(wt.n, "N")?;
        match wt.annuli[..] {
            [i, j] => self.term(i, j, n),
            _ => Err(Error::domain("easy-check witness needs annuli [i, j]")),
        }
    }

    fn run(&self) -> Result<CheckReport> {
        let window = self.model.valid_after(1);
        if window == 0 {
            return Err(Error::Unsupported("empty window".into()));
        }
        let best = (1..=window)
            .into_par_iter()
            .map(|j| {
                let mut best = Best::new();
                for n in 1..=self.model.n_max {
                    for i in j.saturating_sub(n).max(1)..=(j + n).min(self.model.j_max()) {
                        let v = self.term(i, j, n)?;
                        if v > 0.0 {
                            best.offer(v, || Witness {
                                n: Some(n),
                                annuli: vec![i, j],
                                ..Default::default()
                            });
                        }
                    }
                }
                Ok(best)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(Best::new(), Best::merge);
        let (a, b) = self.certified();
        Ok(best
            .finish(self.id())?
            .with_meta("p", self.p)
            .with_meta("eta", self.eta)
            .with_meta("certified_alpha", a)
            .with_meta("certified_beta", b)
            .with_meta("n_max", self.model.n_max)
            .with_meta("window", window))
    }
}

/// `sup_i M_s^dis w(i) / w_i` over the valid window; `s = 1` uses `M^dis w`.
pub struct Msw<'a> {
    pub model: &'a RadialModel,
    pub w: &'a Weight,
    pub s: f64,
}

impl<'a> Msw<'a> {
    pub fn new(model: &'a RadialModel, w: &'a Weight, s: f64) -> Result<Self> {
        check_grid(model, w)?;
        if !(s >= 1.0 && s.is_finite()) {
            return Err(Error::domain(format!("power s = {s} must be at least 1")));
        }
        Ok(Msw { model, w, s })
    }

    /// Exponents certified by a finite constant: `(s'p/(s'+1), s'/(s'+1))`, `s'` the conjugate of `s`.
    pub fn certified(&self, p: f64) -> (f64, f64) {
        if self.s == 1.0 {
            return (p, 1.0);
        }
        let sc = self.s / (self.s - 1.0);
        (sc * p / (sc + 1.0), sc / (sc + 1.0))
    }

    fn ratios(&self) -> Result<(Vec<f64>, Vec<usize>)> {
        let wf = RadialFunction::from_weight(self.w);
        let m = self.model.maximal_dis(&wf.powf(self.s))?;
        let r = m
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v.powf(1.0 / self.s) / self.w.values[i])
            .collect();
        Ok((r, m.argmax))
    }
}

impl Condition for Msw<'_> {
    fn id(&self) -> String {
        "msw".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let i = *wt.annuli.first().ok_or_else(|| Error::domain("msw witness needs an annulus"))?;
        let (r, _) = self.ratios()?;
        r.get(i.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::range(format!("annulus {i} outside the valid window")))
    }

    fn run(&self) -> Result<CheckReport> {
        let (r, argmax) = self.ratios()?;
        let mut best = Best::new();
        for (k, &v) in r.iter().enumerate() {
            best.offer(v, || Witness {
                annuli: vec![k + 1],
                n: Some(argmax[k]),
                ..Default::default()
            });
        }
        Ok(best
            .finish(self.id())?
            .with_meta("s", self.s)
            .with_meta("n_max", self.model.n_max)
            .with_meta("window", r.len()))
    }
}

/// Classical A_p product over model balls `B(x_j, j)`, `x_j ∈ Ω_j`, with its
/// log-slope in `j`. Averages use the model ball measure `Σ_i |Ω_i ∩ B|`.
pub struct ClassicalAp<'a> {
    pub model: &'a RadialModel,
    pub w: &'a Weight,
    pub p: f64,
    pub j_range: (usize, usize),
}

/// Fitted slopes below this multiple of `ρ` count as no divergence.
pub const CLASSICAL_SLOPE_TOL: f64 = 0.1;

impl<'a> ClassicalAp<'a> {
    pub fn new(model: &'a RadialModel, w: &'a Weight, p: f64, j_range: (usize, usize)) -> Result<Self> {
        check_grid(model, w)?;
        let (lo, hi) = j_range;
        if !(p > 1.0) || lo == 0 || lo >= hi {
            return Err(Error::domain(format!("need p > 1 and 1 <= lo < hi, got p = {p}, range {j_range:?}")));
        }
        if 2 * hi + 1 > model.j_max() {
            return Err(Error::range(format!(
                "ball B(x_{hi}, {hi}) reaches annulus {} beyond J_max = {}",
                2 * hi + 1,
                model.j_max()
            )));
        }
        Ok(ClassicalAp { model, w, p, j_range })
    }

    pub fn product(&self, j: usize) -> Result<f64> {
        let g = &self.model.grid;
        let d = g.midpoint(j);
        let q = -1.0 / (self.p - 1.0);
        let (mut m, mut a, mut b) = (0.0, 0.0, 0.0);
        for i in 1..=(2 * j + 1).min(g.j_max) {
            let x = g.annular_intersection(i, j, d)?;
            let wi = self.w.at(i);
            m += x;
            a += wi * x;
            b += wi.powf(q) * x;
        }
        Ok((a / m) * (b / m).powf(self.p - 1.0))
    }
}

impl Condition for ClassicalAp<'_> {
    fn id(&self) -> String {
        "classical-ap".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let j = *wt.annuli.first().ok_or_else(|| Error::domain("classical-ap witness needs an annulus"))?;
        self.product(j)
    }

    fn run(&self) -> Result<CheckReport> {
        let (lo, hi) = self.j_range;
        let js: Vec<usize> = (lo..=hi).collect();
        let prods = js.iter().map(|&j| self.product(j)).collect::<Result<Vec<_>>>()?;
        let x: Vec<f64> = js.iter().map(|&j| j as f64).collect();
        let lf = fit::log_slope(&x, &prods)?;
        let mut best = Best::new();
        for (k, &v) in prods.iter().enumerate() {
            best.offer(v, || Witness {
                annuli: vec![js[k]],
                ..Default::default()
            });
        }
        let rho = self.model.grid.params.rho;
        let mut r = best
            .finish(self.id())?
            .with_meta("p", self.p)
            .with_meta("j_range", [lo, hi])
            .with_meta("min_product", prods.iter().cloned().fold(f64::INFINITY, f64::min))
            .with_meta("products", &prods);
        r.slope = Some(lf.slope);
        r.r2 = Some(lf.r2);
        r.verdict = if lf.slope < CLASSICAL_SLOPE_TOL * rho { Verdict::Pass } else { Verdict::Fail };
        Ok(r)
    }
}

/// One-dimensional local A_p surrogate
/// `sup_{I, |I| ≤ 2} ⟨w⟩_I ⟨w^{-1/(p-1)}⟩_I^{p-1}` with `dμ = A(t) dt`, over
/// intervals with endpoints on a `step` sweep of `[t_min, t_max]`.
pub struct ApLoc {
    pub profile: Profile,
    pub params: crate::geometry::SpaceParams,
    pub p: f64,
    pub step: f64,
    pub t_min: f64,
    pub t_max: f64,
}

const GL_NODES: usize = 12;
/// Geometric grading of the first cell: subcells `[h 2^{-k-1}, h 2^{-k}]`.
const FIRST_CELL_HALVINGS: usize = 60;

impl ApLoc {
    pub fn new(w: &Weight, p: f64) -> Result<Self> {
        let profile = w
            .profile
            .clone()
            .ok_or_else(|| Error::Unsupported("local A_p check needs a continuum profile".into()))?;
        if !(p > 1.0) {
            return Err(Error::domain(format!("need p > 1, got {p}")));
        }
        Ok(ApLoc {
            profile,
            params: w.grid.params,
            p,
            step: 0.1,
            t_min: 1e-9,
            t_max: w.grid.j_max as f64,
        })
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_t_min(mut self, t_min: f64) -> Self {
        self.t_min = t_min;
        self
    }

    fn dual(&self, t: f64) -> f64 {
        self.profile.eval(t).powf(-1.0 / (self.p - 1.0))
    }

    /// `(∫A, ∫wA, ∫w'A)` over `[a, b]` by fixed Gauss–Legendre.
    fn cell(&self, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> [f64; 3] {
        let (c, h) = ((a + b) / 2.0, (b - a) / 2.0);
        let mut out = [0.0; 3];
        for (x, wt) in nodes.iter().zip(weights) {
            let t = c + h * x;
            let da = wt * h * self.params.density(t);
            out[0] += da;
            out[1] += self.profile.eval(t) * da;
            out[2] += self.dual(t) * da;
        }
        out
    }

    fn cells(&self) -> Result<Vec<[f64; 3]>> {
        let n = ((self.t_max - 0.0) / self.step).round() as usize;
        if n == 0 || !(self.t_min > 0.0 && self.t_min < self.step) {
            return Err(Error::domain("local A_p sweep needs 0 < t_min < step < t_max"));
        }
        let (nodes, weights) = gauss_legendre(GL_NODES);
        let mut out: Vec<[f64; 3]> = (0..n)
            .into_par_iter()
            .map(|c| {
                let (a, b) = (c as f64 * self.step, (c + 1) as f64 * self.step);
                if c > 0 {
                    return self.cell(a, b, &nodes, &weights);
                }
                let mut acc = [0.0; 3];
                let mut hi = b;
                for _ in 0..FIRST_CELL_HALVINGS {
                    let lo = (hi / 2.0).max(self.t_min);
                    let v = self.cell(lo, hi, &nodes, &weights);
                    (0..3).for_each(|k| acc[k] += v[k]);
                    if lo <= self.t_min {
                        break;
                    }
                    hi = lo;
                }
                acc
            })
            .collect();
        if out.iter().flatten().any(|v| !v.is_finite()) {
            out.clear();
            return Err(Error::Range("profile integrals overflow".into()));
        }
        Ok(out)
    }

    fn product(&self, s: [f64; 3]) -> f64 {
        (s[1] / s[0]) * (s[2] / s[0]).powf(self.p - 1.0)
    }
}

impl Condition for ApLoc {
    fn id(&self) -> String {
        "ap-loc".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let [a, b] = need(wt.interval, "interval")?;
        let int = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
            let piece = |lo: f64, hi: f64| {
                quad::integrate(|t| g(t) * self.params.density(t), lo, hi, 1e-14, 0.0).map(|q| q.value)
            };
            let mut total = 0.0;
            let mut lo = a;
            if a <= self.t_min {
                let top = self.step.min(b);
                let mut hi = top;
                loop {
                    let l = (hi / 2.0).max(self.t_min);
                    total += piece(l, hi)?;
                    if l <= self.t_min {
                        break;
                    }
                    hi = l;
                }
                lo = top;
            }
            if b > lo {
                total += piece(lo, b)?;
            }
            Ok(total)
        };
        let s = [
            int(&|_| 1.0)?,
            int(&|t| self.profile.eval(t))?,
            int(&|t| self.dual(t))?,
        ];
        Ok(self.product(s))
    }

    fn run(&self) -> Result<CheckReport> {
        let cells = self.cells()?;
        let span = (2.0 / self.step).round() as usize;
        let best = (0..cells.len())
            .into_par_iter()
            .map(|start| {
                let mut best = Best::new();
                let mut acc = [0.0; 3];
                for (len, c) in cells[start..(start + span).min(cells.len())].iter().enumerate() {
                    (0..3).for_each(|k| acc[k] += c[k]);
                    best.offer(self.product(acc), || {
                        let a = if start == 0 { self.t_min } else { start as f64 * self.step };
                        Witness {
                            interval: Some([a, (start + len + 1) as f64 * self.step]),
                            ..Default::default()
                        }
                    });
                }
                best
            })
            .reduce(Best::new, Best::merge);
        Ok(best
            .finish(self.id())?
            .with_meta("p", self.p)
            .with_meta("step", self.step)
            .with_meta("t_min", self.t_min)
            .with_meta("t_max", self.t_max))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{AnnularGrid, Normalization, SpaceParams};
    use crate::weights::WeightSpec;

    fn setup(j: usize, n: usize) -> RadialModel {
        let g = Arc::new(AnnularGrid::new(SpaceParams::canonical(), j).unwrap());
        RadialModel::new(g, n, Normalization::Scalar).unwrap()
    }

    fn weight(m: &RadialModel, spec: WeightSpec) -> Weight {
        spec.materialize(&m.grid).unwrap()
    }

    #[test]
    fn large_scale_singletons_match_band_sum() {
        let m = setup(60, 15);
        let w = weight(&m, WeightSpec::Constant);
        let c = LargeScale::new(&m, &w, 2.0, 0.75, 0.5, &FamilySpec::Singletons).unwrap();
        let r = c.run().unwrap();
        let mut best: f64 = 0.0;
        for n in 1..=15 {
            let k = m.kernel(n).unwrap();
            for i in 1..=c.family.window {
                for j in 1..=c.family.window {
                    let p = k.get(i, j);
                    if p > 0.0 {
                        let den = (2.0 * 0.5 * n as f64).exp()
                            * m.grid.measure(i).powf(0.375)
                            * m.grid.measure(j).powf(0.625);
                        best = best.max(p / den);
                    }
                }
            }
        }
        assert!((r.constant - best).abs() <= 1e-10 * best, "{} vs {best}", r.constant);
        assert!(c.reproduce(&r).unwrap() <= 1e-10);
    }

    #[test]
    fn large_scale_rejects_bad_exponents() {
        let m = setup(40, 8);
        let w = weight(&m, WeightSpec::Constant);
        assert!(LargeScale::new(&m, &w, 2.0, 0.4, 0.5, &FamilySpec::Default).is_err());
        assert!(LargeScale::new(&m, &w, 2.0, 2.0, 0.5, &FamilySpec::Default).is_err());
        assert!(LargeScale::new(&m, &w, 2.0, 1.0, 0.0, &FamilySpec::Default).is_err());
    }

    #[test]
    fn necessary_for_decaying_weight() {
        let m = setup(50, 12);
        let w = weight(&m, WeightSpec::ExpRadial { gamma: -1.0 });
        let c = LargeScale::necessary(&m, &w, 2.0, &FamilySpec::Default).unwrap();
        let r = c.run().unwrap();
        assert!(r.constant.is_finite() && r.constant > 0.0);
        assert!(c.reproduce(&r).unwrap() <= 1e-10);
    }

    #[test]
    fn easy_check_growth_detector() {
        let m = setup(50, 12);
        let fine = weight(&m, WeightSpec::ExpStrong { p: 2.0 });
        let c = EasyCheck::new(&m, &fine, 2.0, -1.0).unwrap();
        let r = c.run().unwrap();
        assert!(r.constant < 50.0, "{}", r.constant);
        assert!(c.reproduce(&r).unwrap() <= 1e-10);
        let wild = weight(&m, WeightSpec::ExpRadial { gamma: 5.0 });
        let small = setup(50, 6);
        let a = EasyCheck::new(&small, &wild, 2.0, 0.0).unwrap().run().unwrap();
        let b = EasyCheck::new(&m, &wild, 2.0, 0.0).unwrap().run().unwrap();
        assert!(b.constant > 1e3 * a.constant);
    }

    #[test]
    fn msw_constant_weight() {
        let m = setup(60, 15);
        let w = weight(&m, WeightSpec::Constant);
        let c = Msw::new(&m, &w, 2.0).unwrap();
        let r = c.run().unwrap();
        assert!(r.constant <= 4.0);
        assert!(c.reproduce(&r).unwrap() <= 1e-10);
        assert!(Msw::new(&m, &w, 0.5).is_err());
        let (a, b) = c.certified(2.0);
        assert!((a - 4.0 / 3.0).abs() < 1e-15 && (b - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn classical_ap_constant_weight() {
        let m = setup(80, 10);
        let w = weight(&m, WeightSpec::Constant);
        let r = ClassicalAp::new(&m, &w, 2.0, (5, 35)).unwrap().run().unwrap();
        assert!(r.slope.unwrap().abs() < 1e-12);
        assert!((r.constant - 1.0).abs() < 1e-12);
        assert!(ClassicalAp::new(&m, &w, 2.0, (5, 40)).is_err());
    }

    #[test]
    fn ap_loc_constant_is_one() {
        let m = setup(10, 3);
        let w = weight(&m, WeightSpec::Constant);
        let c = ApLoc::new(&w, 2.0).unwrap();
        let r = c.run().unwrap();
        assert_eq!(r.constant, 1.0);
        let from_values = Weight::from_values(&m.grid, vec![1.0; 10]).unwrap();
        assert!(ApLoc::new(&from_values, 2.0).is_err());
    }

    #[test]
    fn ap_loc_witness_reproduces() {
        let m = setup(20, 3);
        let w = weight(&m, WeightSpec::ExpRadial { gamma: -0.75 });
        let c = ApLoc::new(&w, 2.0).unwrap();
        let r = c.run().unwrap();
        assert!(c.reproduce(&r).unwrap() <= 1e-10, "{:?}", r.witness);
    }
}
