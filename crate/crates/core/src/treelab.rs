//! Exact computations on the rooted k-ary tree truncated at a finite depth.
//!
//! Vertices use heap numbering: the root is 0 and the children of `v` are
//! `k v + 1, …, k v + k`. Balls whose radius reaches the truncation depth are
//! flagged, since the infinite tree would continue there.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rooted k-ary tree truncated at depth `D`, with counting measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpace {
    pub k: usize,
    pub depth: usize,
    level_start: Vec<usize>,
}

/// Vertex set of a ball together with its truncation flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeBall {
    pub vertices: Vec<usize>,
    pub touches_boundary: bool,
}

/// Exact maximal function with the attaining radius per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMaximal {
    pub values: Vec<f64>,
    pub radius: Vec<usize>,
    /// Whether the attaining ball reaches the truncation depth.
    pub boundary: Vec<bool>,
}

/// Pair-counting mode for product measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    ExactDistance,
    LessThan,
}

/// Both sides of the Kolmogorov inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovReport {
    pub q: f64,
    /// `Σ_B (Mf)^q`.
    pub lhs: f64,
    /// `c^q / (1 - q) |B|^{1-q} ‖f‖₁^q`.
    pub rhs: f64,
    /// Weak-(1,1) constant used on the right.
    pub constant: f64,
    pub holds: bool,
}

impl TreeSpace {
    pub fn new(k: usize, depth: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("branching k = {k} must be at least 2")));
        }
        let count = (k as f64).powi(depth as i32 + 1);
        if count > 5e7 || depth > 60 {
            return Err(Error::range(format!("T_{k} at depth {depth} has too many vertices")));
        }
        let mut level_start = Vec::with_capacity(depth + 2);
        let mut s = 0;
        let mut width = 1;
        for _ in 0..=depth + 1 {
            level_start.push(s);
            s += width;
            width *= k;
        }
        Ok(TreeSpace { k, depth, level_start })
    }

    /// `(k^{D+1} - 1)/(k - 1)`.
    pub fn vertex_count(&self) -> usize {
        self.level_start[self.depth + 1]
    }

    pub fn depth_of(&self, v: usize) -> usize {
        self.level_start.partition_point(|&s| s <= v) - 1
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v > 0).then(|| (v - 1) / self.k)
    }

    pub fn children(&self, v: usize) -> impl Iterator<Item = usize> {
        let inside = self.depth_of(v) < self.depth;
        let first = self.k * v + 1;
        (first..first + self.k).filter(move |_| inside)
    }

    /// Vertices of level `d`.
    pub fn level(&self, d: usize) -> std::ops::Range<usize> {
        self.level_start[d]..self.level_start[d + 1]
    }

    /// Length of the unique path between `x` and `y`.
    pub fn distance(&self, x: usize, y: usize) -> usize {
        let (mut a, mut b) = (x, y);
        let (mut da, mut db) = (self.depth_of(a), self.depth_of(b));
        let mut d = 0;
        while da > db {
            a = (a - 1) / self.k;
            da -= 1;
            d += 1;
        }
        while db > da {
            b = (b - 1) / self.k;
            db -= 1;
            d += 1;
        }
        while a != b {
            a = (a - 1) / self.k;
            b = (b - 1) / self.k;
            d += 2;
        }
        d
    }

    /// Root path such as `"0.1.0"`; the root is `""`.
    pub fn path(&self, v: usize) -> String {
        let mut digits = Vec::new();
        let mut cur = v;
        while cur > 0 {
            digits.push(((cur - 1) % self.k).to_string());
            cur = (cur - 1) / self.k;
        }
        digits.reverse();
        digits.join(".")
    }

    pub fn parse_path(&self, path: &str) -> Result<usize> {
        let mut v = 0;
        if path.is_empty() {
            return Ok(0);
        }
        for (d, part) in path.split('.').enumerate() {
            let c: usize = part
                .parse()
                .map_err(|_| Error::domain(format!("bad path component {part:?}")))?;
            if c >= self.k || d >= self.depth {
                return Err(Error::range(format!("path {path:?} leaves T_{} at depth {}", self.k, self.depth)));
            }
            v = self.k * v + 1 + c;
        }
        Ok(v)
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.vertex_count() {
            return Err(Error::range(format!("vertex {v} outside the tree")));
        }
        Ok(())
    }

    fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent(v).into_iter().chain(self.children(v))
    }

    /// `B(x, r)` by breadth-first search.
    pub fn ball(&self, x: usize, r: usize) -> Result<TreeBall> {
        self.check_vertex(x)?;
        if r > 2 * self.depth {
            return Err(Error::range(format!("radius {r} exceeds the diameter {}", 2 * self.depth)));
        }
        let mut dist = vec![usize::MAX; self.vertex_count()];
        let mut queue = VecDeque::from([x]);
        dist[x] = 0;
        let mut vertices = Vec::new();
        while let Some(v) = queue.pop_front() {
            vertices.push(v);
            if dist[v] == r {
                continue;
            }
            for u in self.neighbours(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        Ok(TreeBall {
            vertices,
            touches_boundary: self.depth_of(x) + r >= self.depth,
        })
    }

    /// `|B(x, r)|`, which depends only on the depth of `x`.
    pub fn ball_size(&self, x: usize, r: usize) -> usize {
        let d = self.depth_of(x);
        let mut size = self.down_count(d, r as isize);
        for i in 1..=r.min(d) {
            let h = (r - i) as isize;
            size += self.down_count(d - i, h) - self.down_count(d - i + 1, h - 1);
        }
        size
    }

    /// Vertices within `h` levels below a vertex of depth `d`, itself included.
    fn down_count(&self, d: usize, h: isize) -> usize {
        if h < 0 {
            return 0;
        }
        self.level_start[(h as usize).min(self.depth - d) + 1]
    }

    /// `down[v * (D + 1) + h]` sums `f` over the descendants of `v` within `h` levels.
    fn down_sums(&self, f: &[f64]) -> Vec<f64> {
        let n = self.vertex_count();
        let w = self.depth + 1;
        let mut down = vec![0.0; n * w];
        for d in (0..=self.depth).rev() {
            for v in self.level(d) {
                down[v * w..(v + 1) * w].fill(f[v]);
                if d < self.depth {
                    for c in self.k * v + 1..=self.k * v + self.k {
                        for h in 1..w {
                            down[v * w + h] += down[c * w + h - 1];
                        }
                    }
                }
            }
        }
        down
    }

    /// Exact `Mf(x) = max_{0 ≤ r ≤ 2D} |B(x,r)|^{-1} Σ_{B(x,r)} |f|`.
    pub fn maximal(&self, f: &[f64]) -> Result<TreeMaximal> {
        let n = self.vertex_count();
        if f.len() != n {
            return Err(Error::domain(format!("function has {} values, tree has {n} vertices", f.len())));
        }
        let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
        let down = self.down_sums(&abs);
        let w = self.depth + 1;
        let get = |v: usize, h: isize| -> f64 {
            if h < 0 {
                0.0
            } else {
                down[v * w + (h as usize).min(self.depth)]
            }
        };
        let sizes: Vec<Vec<f64>> = (0..=self.depth)
            .map(|d| {
                let x = self.level_start[d];
                (0..=2 * self.depth).map(|r| self.ball_size(x, r) as f64).collect()
            })
            .collect();
        let best: Vec<(f64, usize)> = (0..n)
            .into_par_iter()
            .map(|x| {
                let d = self.depth_of(x);
                let mut anc = [0usize; 64];
                anc[0] = x;
                for i in 1..=d {
                    anc[i] = (anc[i - 1] - 1) / self.k;
                }
                let mut best = (f64::NEG_INFINITY, 0);
                for (r, &size) in sizes[d].iter().enumerate() {
                    let mut s = get(x, r as isize);
                    for i in 1..=d.min(r) {
                        let h = (r - i) as isize;
                        s += get(anc[i], h) - get(anc[i - 1], h - 1);
                    }
                    let avg = s / size;
                    if avg > best.0 {
                        best = (avg, r);
                    }
                }
                best
            })
            .collect();
        let values = best.iter().map(|b| b.0).collect();
        let radius: Vec<usize> = best.iter().map(|b| b.1).collect();
        let boundary = radius.iter().enumerate().map(|(x, r)| self.depth_of(x) + r >= self.depth).collect();
        Ok(TreeMaximal { values, radius, boundary })
    }

    /// `Σ_{(x,y) ∈ E×F, d(x,y) = N (or < N)} w(y)`.
    pub fn product_measure(&self, w: &[f64], e: &[usize], f: &[usize], n: usize, mode: PairMode) -> Result<f64> {
        if w.len() != self.vertex_count() {
            return Err(Error::domain("weight length does not match the tree"));
        }
        if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain("tree weight must be positive and finite"));
        }
        for &v in e.iter().chain(f) {
            self.check_vertex(v)?;
        }
        let mut in_f = vec![false; self.vertex_count()];
        for &v in f {
            in_f[v] = true;
        }
        let reach = match mode {
            PairMode::ExactDistance => n,
            PairMode::LessThan => match n.checked_sub(1) {
                Some(r) => r,
                None => return Ok(0.0),
            },
        };
        let reach = reach.min(2 * self.depth);
        let mut e = e.to_vec();
        e.sort_unstable();
        e.dedup();
        let mut total = 0.0;
        for &x in &e {
            for v in self.ball(x, reach)?.vertices {
                let hit = match mode {
                    PairMode::ExactDistance => self.distance(x, v) == n,
                    PairMode::LessThan => true,
                };
                if hit && in_f[v] {
                    total += w[v];
                }
            }
        }
        Ok(total)
    }

    /// Product measure divided by `k^{Nβ} w(E)^{α/p} w(F)^{1-α/p}`.
    #[allow(clippy::too_many_arguments)]
    pub fn product_ratio(
        &self,
        w: &[f64],
        e: &[usize],
        f: &[usize],
        n: usize,
        mode: PairMode,
        p: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<f64> {
        let num = self.product_measure(w, e, f, n, mode)?;
        let we: f64 = e.iter().map(|&v| w[v]).sum();
        let wf: f64 = f.iter().map(|&v| w[v]).sum();
        if we == 0.0 || wf == 0.0 {
            return Err(Error::Unsupported("empty set in product ratio".into()));
        }
        Ok(num / ((self.k as f64).powf(n as f64 * beta) * we.powf(alpha / p) * wf.powf(1.0 - alpha / p)))
    }

    /// `sup_λ λ |{x : Mf(x) > λ}| / ‖f‖₁`, optionally skipping boundary-flagged vertices.
    pub fn weak_ratio(&self, f: &[f64], mf: &TreeMaximal, exclude_boundary: bool) -> f64 {
        let norm: f64 = f.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            return 0.0;
        }
        let mut vals: Vec<f64> = mf
            .values
            .iter()
            .zip(&mf.boundary)
            .filter(|(_, b)| !(exclude_boundary && **b))
            .map(|(v, _)| *v)
            .collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let best = vals
            .iter()
            .enumerate()
            .map(|(i, v)| v * (i + 1) as f64)
            .fold(0.0, f64::max);
        best / norm
    }

    /// Checks `Σ_B (Mf)^q ≤ c^q/(1-q) |B|^{1-q} ‖f‖₁^q` with `c` the weak-(1,1)
    /// ratio of `f` itself over the whole tree.
    pub fn kolmogorov(&self, q: f64, f: &[f64], set: &[usize]) -> Result<KolmogorovReport> {
        let mf = self.maximal(f)?;
        let c = self.weak_ratio(f, &mf, false);
        self.kolmogorov_with(q, f, &mf, set, c)
    }

    /// As [`TreeSpace::kolmogorov`] with a caller-supplied constant.
    pub fn kolmogorov_with(
        &self,
        q: f64,
        f: &[f64],
        mf: &TreeMaximal,
        set: &[usize],
        constant: f64,
    ) -> Result<KolmogorovReport> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("q = {q} must lie in (0, 1)")));
        }
        let mut set = set.to_vec();
        set.sort_unstable();
        set.dedup();
        for &v in &set {
            self.check_vertex(v)?;
        }
        let lhs: f64 = set.iter().map(|&v| mf.values[v].powf(q)).sum();
        let norm: f64 = f.iter().map(|v| v.abs()).sum();
        let rhs = constant.powf(q) / (1.0 - q) * (set.len() as f64).powf(1.0 - q) * norm.powf(q);
        Ok(KolmogorovReport {
            q,
            lhs,
            rhs,
            constant,
            holds: lhs <= rhs * (1.0 + 1e-12),
        })
    }

    /// Random Dirac sum: 1 to 4 integer masses in `1..=10` at vertices of
    /// depth at most `D/2`.
    pub fn random_dirac_sum<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut f = vec![0.0; self.vertex_count()];
        let top = self.level_start[self.depth / 2 + 1];
        for _ in 0..rng.random_range(1..=4) {
            let v = rng.random_range(0..top);
            f[v] += rng.random_range(1..=10) as f64;
        }
        f
    }

    /// `count` Dirac sums drawn in order from a ChaCha8 stream seeded with `seed`.
    pub fn random_dirac_batch(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.random_dirac_sum(&mut rng)).collect()
    }
}

/// `‖(Σ_n (M f_n)^r)^{1/r}‖_p / ‖(Σ_n |f_n|^r)^{1/r}‖_p` on the tree, with
/// the numerator restricted to vertices not boundary-flagged for any `n`.
pub fn vector_valued_ratio_tree(tree: &TreeSpace, p: f64, r: f64, fs: &[Vec<f64>]) -> Result<f64> {
    if !(1.0 < r && r <= p && p.is_finite()) {
        return Err(Error::domain(format!("need 1 < r <= p < inf, got r = {r}, p = {p}")));
    }
    let n = tree.vertex_count();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    let mut flagged = vec![false; n];
    for f in fs {
        let mf = tree.maximal(f)?;
        for x in 0..n {
            num[x] += mf.values[x].powf(r);
            den[x] += f[x].abs().powf(r);
            flagged[x] |= mf.boundary[x];
        }
    }
    let lp = |v: &[f64], skip: Option<&[bool]>| -> f64 {
        v.iter()
            .enumerate()
            .filter(|(i, _)| skip.is_none_or(|s| !s[*i]))
            .map(|(_, a)| a.powf(p / r))
            .sum::<f64>()
            .powf(1.0 / p)
    };
    let d = lp(&den, None);
    if d == 0.0 {
        return Ok(0.0);
    }
    Ok(lp(&num, Some(&flagged)) / d)
}
