use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{need, Best, CheckReport, Condition, Verdict, Witness};
use crate::error::{Error, Result};
use crate::fit;
use crate::radialops::{distribution_mass, RadialFunction, RadialModel};
use crate::treelab::{self, TreeMaximal, TreeSpace};
use crate::weights::Weight;

/// Levels `λ = 2^a` for `a` from `lo` to `hi` in steps of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            lo: -40.0,
            hi: 10.0,
            step: 0.25,
        }
    }
}

impl LambdaGrid {
    pub fn levels(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.hi >= self.lo) {
            return Err(Error::domain("lambda grid needs step > 0 and hi >= lo"));
        }
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        Ok((0..=n).map(|k| (self.lo + k as f64 * self.step).exp2()).collect())
    }
}

fn lp_norm_w(w: &Weight, f: &RadialFunction, p: f64) -> Result<f64> {
    if f.valid_upto() > w.len() {
        return Err(Error::range("function window exceeds the weight's grid"));
    }
    Ok(f.values
        .iter()
        .enumerate()
        .map(|(i, v)| v.powf(p) * w.values[i] * w.grid.measure(i + 1))
        .sum())
}

fn zero_report(id: String) -> CheckReport {
    let mut r = CheckReport::new(id, 0.0, Witness::default()).with_meta("zero_function", true);
    r.verdict = Verdict::Pass;
    r
}

/// `sup_λ λ^p w({M^dis f > λ}) / ‖f‖^p_{L^p(w)}`.
pub struct WeakType<'a> {
    pub model: &'a RadialModel,
    pub w: &'a Weight,
    pub p: f64,
    pub f: RadialFunction,
    pub grid: LambdaGrid,
}

impl WeakType<'_> {
    fn level(&self, mf: &RadialFunction, norm: f64, lambda: f64) -> Result<f64> {
        Ok(lambda.powf(self.p) * distribution_mass(self.w, mf, lambda)? / norm)
    }
}

impl Condition for WeakType<'_> {
    fn id(&self) -> String {
        "weak-type".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let norm = lp_norm_w(self.w, &self.f, self.p)?;
        if norm == 0.0 {
            return Ok(0.0);
        }
        let mf = self.model.maximal_dis(&self.f)?.function();
        self.level(&mf, norm, need(wt.lambda, "lambda")?)
    }

    fn run(&self) -> Result<CheckReport> {
        let norm = lp_norm_w(self.w, &self.f, self.p)?;
        if norm == 0.0 {
            return Ok(zero_report(self.id()));
        }
        let mf = self.model.maximal_dis(&self.f)?.function();
        let mut best = Best::new();
        for lambda in self.grid.levels()? {
            best.offer(self.level(&mf, norm, lambda)?, || Witness {
                lambda: Some(lambda),
                ..Default::default()
            });
        }
        Ok(best
            .finish(self.id())?
            .with_meta("p", self.p)
            .with_meta("lambda_grid", self.grid)
            .with_meta("window", mf.valid_upto()))
    }
}

/// Partial sums `Σ_{j ≤ J_cut} (M^dis f)_j^p w_j |Ω_j|`, divided by
/// `‖f‖^p_{L^p(w)}`, with linear and log-log growth fits in `J_cut`.
pub struct StrongType<'a> {
    pub model: &'a RadialModel,
    pub w: &'a Weight,
    pub p: f64,
    pub f: RadialFunction,
    pub cuts: Vec<usize>,
}

impl StrongType<'_> {
    fn partial(&self, mf: &RadialFunction, cut: usize) -> Result<f64> {
        if cut == 0 || cut > mf.valid_upto() {
            return Err(Error::range(format!("J_cut = {cut} outside the valid window 1..={}", mf.valid_upto())));
        }
        Ok((1..=cut)
            .map(|j| mf.at(j).powf(self.p) * self.w.at(j) * self.w.grid.measure(j))
            .sum())
    }

    pub fn partial_sums(&self) -> Result<Vec<f64>> {
        let norm = lp_norm_w(self.w, &self.f, self.p)?;
        let mf = self.model.maximal_dis(&self.f)?.function();
        self.cuts
            .iter()
            .map(|&c| Ok(if norm == 0.0 { 0.0 } else { self.partial(&mf, c)? / norm }))
            .collect()
    }
}

impl Condition for StrongType<'_> {
    fn id(&self) -> String {
        "strong-type".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let cut = *wt.annuli.first().ok_or_else(|| Error::domain("strong-type witness needs J_cut"))?;
        let norm = lp_norm_w(self.w, &self.f, self.p)?;
        if norm == 0.0 {
            return Ok(0.0);
        }
        let mf = self.model.maximal_dis(&self.f)?.function();
        Ok(self.partial(&mf, cut)? / norm)
    }

    fn run(&self) -> Result<CheckReport> {
        if self.cuts.len() < 2 {
            return Err(Error::domain("strong-type fit needs at least two cuts"));
        }
        if lp_norm_w(self.w, &self.f, self.p)? == 0.0 {
            return Ok(zero_report(self.id()));
        }
        let sums = self.partial_sums()?;
        let x: Vec<f64> = self.cuts.iter().map(|&c| c as f64).collect();
        let lin = fit::linear_fit(&x, &sums)?;
        let growth = fit::loglog_slope(&x, &sums)?;
        let mut best = Best::new();
        for (k, &v) in sums.iter().enumerate() {
            best.offer(v, || Witness {
                annuli: vec![self.cuts[k]],
                ..Default::default()
            });
        }
        let mut r = best
            .finish(self.id())?
            .with_meta("p", self.p)
            .with_meta("cuts", &self.cuts)
            .with_meta("partial_sums", &sums)
            .with_meta("growth_exponent", growth.slope)
            .with_meta("growth_r2", growth.r2);
        r.slope = Some(lin.slope);
        r.r2 = Some(lin.r2);
        r.verdict = Verdict::Info;
        Ok(r)
    }
}

/// Right-hand side majorant of the Fefferman–Stein ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Iterated {
    /// `M_s^dis w`, `s > 1`.
    Power { s: f64 },
    /// `M^(k) w`.
    Iterate { k: usize },
}

/// `sup_λ λ w({M^dis f > λ}) / Σ_j f_j G_j |Ω_j|`.
pub struct FsRatio<'a> {
    pub model: &'a RadialModel,
    pub w: &'a Weight,
    pub f: RadialFunction,
    pub majorant: Iterated,
    pub grid: LambdaGrid,
}

impl FsRatio<'_> {
    fn denominator(&self) -> Result<f64> {
        let wf = RadialFunction::from_weight(self.w);
        let g = match self.majorant {
            Iterated::Power { s } if s > 1.0 => self.model.maximal_s(&wf, s)?,
            Iterated::Power { s } => return Err(Error::domain(format!("power s = {s} must exceed 1"))),
            Iterated::Iterate { k } => self.model.iterate_maximal(&wf, k)?.function(),
        };
        let mut total = 0.0;
        for (i, &v) in self.f.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            if i >= g.valid_upto() {
                return Err(Error::range(format!(
                    "f is nonzero on annulus {} beyond the majorant's window 1..={}",
                    i + 1,
                    g.valid_upto()
                )));
            }
            total += v * g.values[i] * self.w.grid.measure(i + 1);
        }
        Ok(total)
    }

    fn level(&self, mf: &RadialFunction, den: f64, lambda: f64) -> Result<f64> {
        Ok(lambda * distribution_mass(self.w, mf, lambda)? / den)
    }
}

impl Condition for FsRatio<'_> {
    fn id(&self) -> String {
        "fs-ratio".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let den = self.denominator()?;
        if den == 0.0 {
            return Ok(0.0);
        }
        let mf = self.model.maximal_dis(&self.f)?.function();
        self.level(&mf, den, need(wt.lambda, "lambda")?)
    }

    fn run(&self) -> Result<CheckReport> {
        let den = self.denominator()?;
        if den == 0.0 {
            return Ok(zero_report(self.id()));
        }
        let mf = self.model.maximal_dis(&self.f)?.function();
        let mut best = Best::new();
        for lambda in self.grid.levels()? {
            best.offer(self.level(&mf, den, lambda)?, || Witness {
                lambda: Some(lambda),
                ..Default::default()
            });
        }
        Ok(best
            .finish(self.id())?
            .with_meta("majorant", self.majorant)
            .with_meta("lambda_grid", self.grid)
            .with_meta("window", mf.valid_upto()))
    }
}

/// Input functions for [`VectorValued`].
pub enum VectorBackend<'a> {
    /// Exact maximal function; the numerator skips vertices flagged for any `f_n`.
    Tree { tree: &'a TreeSpace, functions: Vec<Vec<f64>> },
    /// `M^dis` with measure `|Ω_j|`; the numerator runs over the valid window.
    Radial { model: &'a RadialModel, functions: Vec<RadialFunction> },
}

/// `‖(Σ_n (M f_n)^r)^{1/r}‖_p / ‖(Σ_n |f_n|^r)^{1/r}‖_p`, unweighted.
pub struct VectorValued<'a> {
    pub p: f64,
    pub r: f64,
    pub backend: VectorBackend<'a>,
}

impl VectorValued<'_> {
    pub fn ratio(&self) -> Result<f64> {
        let (p, r) = (self.p, self.r);
        if !(1.0 < r && r <= p && p.is_finite()) {
            return Err(Error::domain(format!("need 1 < r <= p < inf, got r = {r}, p = {p}")));
        }
        match &self.backend {
            VectorBackend::Tree { tree, functions } => treelab::vector_valued_ratio_tree(tree, p, r, functions),
            VectorBackend::Radial { model, functions } => {
                let g = &model.grid;
                let n = g.j_max;
                let mut den = vec![0.0; n];
                let mut num = vec![0.0; model.valid_after(1)];
                for f in functions {
                    let mf = model.maximal_dis(f)?;
                    for (i, v) in f.values.iter().enumerate() {
                        den[i] += v.abs().powf(r);
                    }
                    for (i, v) in mf.values.iter().enumerate() {
                        num[i] += v.powf(r);
                    }
                }
                let norm = |v: &[f64]| -> f64 {
                    v.iter()
                        .enumerate()
                        .map(|(i, a)| a.powf(p / r) * g.measure(i + 1))
                        .sum::<f64>()
                        .powf(1.0 / p)
                };
                let d = norm(&den);
                Ok(if d == 0.0 { 0.0 } else { norm(&num) / d })
            }
        }
    }
}

impl Condition for VectorValued<'_> {
    fn id(&self) -> String {
        "vector-valued".into()
    }

    fn evaluate(&self, _: &Witness) -> Result<f64> {
        self.ratio()
    }

    fn run(&self) -> Result<CheckReport> {
        let (backend, count) = match &self.backend {
            VectorBackend::Tree { functions, .. } => ("tree", functions.len()),
            VectorBackend::Radial { functions, .. } => ("radial", functions.len()),
        };
        let v = self.ratio()?;
        let mut rep = CheckReport::new(self.id(), v, Witness::default())
            .with_meta("p", self.p)
            .with_meta("r", self.r)
            .with_meta("backend", backend)
            .with_meta("functions", count);
        if v == 0.0 {
            rep = rep.with_meta("zero_function", true);
        }
        Ok(rep)
    }
}

/// Weak-(1,1) constant of the exact tree maximal function over a batch:
/// `max_f sup_λ λ |{Mf ≥ λ}| / ‖f‖₁`, counting only unflagged vertices.
pub struct TreeWeak11<'a> {
    pub tree: &'a TreeSpace,
    pub functions: Vec<Vec<f64>>,
    pub exclude_boundary: bool,
}

impl<'a> TreeWeak11<'a> {
    /// `count` random Dirac sums drawn from `seed`.
    pub fn random(tree: &'a TreeSpace, count: usize, seed: u64) -> Self {
        TreeWeak11 {
            tree,
            functions: tree.random_dirac_batch(count, seed),
            exclude_boundary: true,
        }
    }

    fn level(&self, f: &[f64], mf: &TreeMaximal, lambda: f64) -> f64 {
        let norm: f64 = f.iter().map(|v| v.abs()).sum();
        let count = mf
            .values
            .iter()
            .zip(&mf.boundary)
            .filter(|(v, b)| **v >= lambda && !(self.exclude_boundary && **b))
            .count();
        lambda * count as f64 / norm
    }

    /// Largest level ratio of one function and the level attaining it.
    fn best_level(&self, mf: &TreeMaximal) -> (f64, f64) {
        let mut vals: Vec<f64> = mf
            .values
            .iter()
            .zip(&mf.boundary)
            .filter(|(_, b)| !(self.exclude_boundary && **b))
            .map(|(v, _)| *v)
            .filter(|v| *v > 0.0)
            .collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let mut best = (0.0, 0.0);
        for (i, &v) in vals.iter().enumerate() {
            if vals.get(i + 1) == Some(&v) {
                continue;
            }
            let c = v * (i + 1) as f64;
            if c > best.0 {
                best = (c, v);
            }
        }
        best
    }

    /// Per-function constants, in batch order.
    pub fn constants(&self) -> Result<Vec<f64>> {
        self.functions
            .iter()
            .map(|f| {
                let norm: f64 = f.iter().map(|v| v.abs()).sum();
                if norm == 0.0 {
                    return Ok(0.0);
                }
                let mf = self.tree.maximal(f)?;
                Ok(self.best_level(&mf).0 / norm)
            })
            .collect()
    }
}

impl Condition for TreeWeak11<'_> {
    fn id(&self) -> String {
        "tree-weak11".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let idx = need(wt.index, "function index")?;
        let f = self.functions.get(idx).ok_or_else(|| Error::range("function index out of range"))?;
        let mf = self.tree.maximal(f)?;
        Ok(self.level(f, &mf, need(wt.lambda, "lambda")?))
    }

    fn run(&self) -> Result<CheckReport> {
        let per = self
            .functions
            .par_iter()
            .enumerate()
            .map(|(idx, f)| {
                let mut best = Best::new();
                let norm: f64 = f.iter().map(|v| v.abs()).sum();
                if norm > 0.0 {
                    let mf = self.tree.maximal(f)?;
                    let (c, lambda) = self.best_level(&mf);
                    best.offer(c / norm, || Witness {
                        index: Some(idx),
                        lambda: Some(lambda),
                        vertices: f
                            .iter()
                            .enumerate()
                            .filter(|(_, a)| **a != 0.0)
                            .map(|(x, _)| self.tree.path(x))
                            .collect(),
                        ..Default::default()
                    });
                }
                Ok(best)
            })
            .collect::<Result<Vec<_>>>()?;
        let best = per.into_iter().fold(Best::new(), Best::merge);
        if best.value == f64::NEG_INFINITY {
            return Ok(zero_report(self.id()));
        }
        Ok(best
            .finish(self.id())?
            .with_meta("k", self.tree.k)
            .with_meta("depth", self.tree.depth)
            .with_meta("functions", self.functions.len())
            .with_meta("exclude_boundary", self.exclude_boundary))
    }
}

/// Kolmogorov inequality over a batch of `(f, B)` cases, with `c` the
/// batch weak-(1,1) constant over the whole tree. Reports `max lhs/rhs`.
pub struct TreeKolmogorov<'a> {
    pub tree: &'a TreeSpace,
    pub q: f64,
    pub cases: Vec<(Vec<f64>, Vec<usize>)>,
}

impl<'a> TreeKolmogorov<'a> {
    /// Random Dirac sums paired with balls `B(x, r)` of random center and radius.
    pub fn random(tree: &'a TreeSpace, q: f64, count: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cases = (0..count)
            .map(|_| {
                let f = tree.random_dirac_sum(&mut rng);
                let x = rng.random_range(0..tree.vertex_count());
                let r = rng.random_range(0..=tree.depth);
                Ok((f, tree.ball(x, r)?.vertices))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TreeKolmogorov { tree, q, cases })
    }

    fn maximals(&self) -> Result<Vec<TreeMaximal>> {
        self.cases.par_iter().map(|(f, _)| self.tree.maximal(f)).collect()
    }

    fn constant(&self, mfs: &[TreeMaximal]) -> f64 {
        self.cases
            .iter()
            .zip(mfs)
            .map(|((f, _), mf)| self.tree.weak_ratio(f, mf, false))
            .fold(0.0, f64::max)
    }

    fn ratio_at(&self, idx: usize, mfs: &[TreeMaximal], c: f64) -> Result<(f64, bool)> {
        let (f, b) = &self.cases[idx];
        let rep = self.tree.kolmogorov_with(self.q, f, &mfs[idx], b, c)?;
        let ratio = if rep.rhs == 0.0 { 0.0 } else { rep.lhs / rep.rhs };
        Ok((ratio, rep.holds))
    }
}

impl Condition for TreeKolmogorov<'_> {
    fn id(&self) -> String {
        "tree-kolmogorov".into()
    }

    fn evaluate(&self, wt: &Witness) -> Result<f64> {
        let idx = need(wt.index, "case index")?;
        if idx >= self.cases.len() {
            return Err(Error::range("case index out of range"));
        }
        let mfs = self.maximals()?;
        Ok(self.ratio_at(idx, &mfs, self.constant(&mfs))?.0)
    }

    fn run(&self) -> Result<CheckReport> {
        let mfs = self.maximals()?;
        let c = self.constant(&mfs);
        let mut best = Best::new();
        let mut failures = 0;
        for idx in 0..self.cases.len() {
            let (ratio, holds) = self.ratio_at(idx, &mfs, c)?;
            failures += usize::from(!holds);
            best.offer(ratio, || Witness {
                index: Some(idx),
                ..Default::default()
            });
        }
        let mut r = best
            .finish(self.id())?
            .with_meta("q", self.q)
            .with_meta("weak_constant", c)
            .with_meta("cases", self.cases.len())
            .with_meta("failures", failures);
        r.verdict = if failures == 0 { Verdict::Pass } else { Verdict::Fail };
        Ok(r)
    }
}
