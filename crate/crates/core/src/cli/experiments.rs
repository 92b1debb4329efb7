use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::config::{patch, BackendConfig, CheckerSpec, ExperimentConfig, FamilyConfig, FunctionSpec, GridConfig};
use super::{Outcome, Row};
use crate::checkers::{
    ApLoc, CheckReport, ClassicalAp, Condition, EasyCheck, FsRatio, Iterated, LargeScale, Msw, StrongType,
    TreeKolmogorov, TreeWeak11, Verdict, VectorBackend, VectorValued, WeakType, DRIFT_TOL, WITNESS_RTOL,
};
use crate::error::{Error, Result};
use crate::fit;
use crate::geometry::Normalization;
use crate::radialops::RadialFunction;
use crate::weights::WeightSpec;

fn run_condition<C: Condition>(c: &C) -> Result<CheckReport> {
    let mut r = c.run()?;
    let dev = c.reproduce(&r)?;
    if dev > WITNESS_RTOL {
        r.verdict = Verdict::Fail;
        r = r.with_meta("witness_mismatch", true);
    }
    Ok(r.with_meta("witness_deviation", dev))
}

/// Runs the configured checker once and re-evaluates its witness.
pub fn run_checker(cfg: &ExperimentConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let seed = cfg.seed;
    let spec = &cfg.checker;
    let report = if let BackendConfig::Tree { .. } = cfg.backend {
        let tree = cfg.tree()?;
        match *spec {
            CheckerSpec::TreeWeak11 {
                count,
                exclude_boundary,
            } => {
                let mut c = TreeWeak11::random(&tree, count, seed);
                c.exclude_boundary = exclude_boundary;
                run_condition(&c)?
            }
            CheckerSpec::TreeKolmogorov { q, count } => run_condition(&TreeKolmogorov::random(&tree, q, count, seed)?)?,
            CheckerSpec::VectorValued { p, r, count } => run_condition(&VectorValued {
                p,
                r,
                backend: VectorBackend::Tree {
                    tree: &tree,
                    functions: tree.random_dirac_batch(count, seed),
                },
            })?,
            _ => unreachable!("validated backend"),
        }
        .with_meta("tree_k", tree.k)
        .with_meta("tree_depth", tree.depth)
    } else {
        let model = cfg.model()?;
        let j_max = model.j_max();
        let w = cfg.weight.materialize(&model.grid)?;
        let r = match spec {
            CheckerSpec::ApLoc { p, step } => run_condition(&ApLoc::new(&w, *p)?.with_step(*step))?,
            CheckerSpec::LargeScale { p, alpha, beta, family } => {
                run_condition(&LargeScale::new(&model, &w, *p, *alpha, *beta, &family.spec(seed))?)?
            }
            CheckerSpec::Necessary { p, family } => {
                run_condition(&LargeScale::necessary(&model, &w, *p, &family.spec(seed))?)?
            }
            CheckerSpec::EasyCheck { p, eta } => run_condition(&EasyCheck::new(&model, &w, *p, *eta)?)?,
            CheckerSpec::Msw { s } => run_condition(&Msw::new(&model, &w, *s)?)?,
            CheckerSpec::ClassicalAp { p, j_lo, j_hi } => {
                run_condition(&ClassicalAp::new(&model, &w, *p, (*j_lo, *j_hi))?)?
            }
            CheckerSpec::WeakType { p, f, lambda } => run_condition(&WeakType {
                model: &model,
                w: &w,
                p: *p,
                f: f.build(j_max)?,
                grid: *lambda,
            })?,
            CheckerSpec::StrongType { p, f, cut_lo, cut_hi } => run_condition(&StrongType {
                model: &model,
                w: &w,
                p: *p,
                f: f.build(j_max)?,
                cuts: (*cut_lo..=*cut_hi).collect(),
            })?,
            CheckerSpec::FsRatio { s, k, f, lambda } => {
                let majorant = match (s, k) {
                    (Some(s), None) => Iterated::Power { s: *s },
                    (None, Some(k)) => Iterated::Iterate { k: *k },
                    _ => unreachable!("validated majorant"),
                };
                run_condition(&FsRatio {
                    model: &model,
                    w: &w,
                    f: f.build(j_max)?,
                    majorant,
                    grid: *lambda,
                })?
            }
            CheckerSpec::VectorValued { p, r, count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let functions = (0..*count)
                    .map(|_| RadialFunction::new((0..j_max).map(|_| rng.random::<f64>()).collect()))
                    .collect::<Result<Vec<_>>>()?;
                run_condition(&VectorValued {
                    p: *p,
                    r: *r,
                    backend: VectorBackend::Radial {
                        model: &model,
                        functions,
                    },
                })?
            }
            CheckerSpec::TreeWeak11 { .. } | CheckerSpec::TreeKolmogorov { .. } => unreachable!("validated backend"),
        };
        let r = r
            .with_meta("j_max", j_max)
            .with_meta("n_max", model.n_max)
            .with_meta("normalization", model.normalization)
            .with_meta("weight", &cfg.weight);
        if w.notes.is_empty() {
            r
        } else {
            r.with_meta("weight_notes", &w.notes)
        }
    };
    Ok(if spec.is_random() { report.with_meta("seed", seed) } else { report })
}

fn param_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn overall(rows: &[Row]) -> Verdict {
    if rows.iter().any(|r| r.report.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if rows.iter().all(|r| r.report.verdict == Verdict::Info) {
        Verdict::Info
    } else {
        Verdict::Pass
    }
}

/// Cartesian sweep over the declared axes, last axis fastest. No axes gives one cell.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let mut base = serde_json::to_value(cfg)?;
    base["axes"] = json!([]);
    let names: Vec<String> = cfg.axes.iter().map(|a| a.path.clone()).collect();
    let cells: usize = cfg.axes.iter().map(|a| a.values.len()).product();
    let mut rows = Vec::with_capacity(cells);
    for cell in 0..cells {
        let mut v = base.clone();
        let mut params = Vec::with_capacity(names.len());
        let mut rest = cell;
        let mut picks = vec![0; cfg.axes.len()];
        for (k, a) in cfg.axes.iter().enumerate().rev() {
            picks[k] = rest % a.values.len();
            rest /= a.values.len();
        }
        for (a, &i) in cfg.axes.iter().zip(&picks) {
            patch(&mut v, &a.segments(), a.values[i].clone())?;
            params.push(param_string(&a.values[i]));
        }
        let cell_cfg = ExperimentConfig::from_value(v)?;
        rows.push(Row {
            params,
            report: run_checker(&cell_cfg)?,
        });
    }
    let verdict = overall(&rows);
    Ok(Outcome {
        id: cfg.name(),
        seed: cfg.seed,
        verdict,
        param_names: names,
        summary: BTreeMap::from([("config".to_string(), serde_json::to_value(cfg)?)]),
        rows,
    })
}

/// Named experiments with canonical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    ExTrivial,
    ExBlesa,
    ExBetaEqAlpha,
    ExSpherical,
    ExNotstrong,
    ExApnot,
    ExGrowthnec,
    ThmFsFailure,
    MfLower,
    TreeWeak11,
    Kolmogorov,
    VectorValued,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 12] = [
        ExperimentId::ExTrivial,
        ExperimentId::ExBlesa,
        ExperimentId::ExBetaEqAlpha,
        ExperimentId::ExSpherical,
        ExperimentId::ExNotstrong,
        ExperimentId::ExApnot,
        ExperimentId::ExGrowthnec,
        ExperimentId::ThmFsFailure,
        ExperimentId::MfLower,
        ExperimentId::TreeWeak11,
        ExperimentId::Kolmogorov,
        ExperimentId::VectorValued,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::ExTrivial => "ex-trivial",
            ExperimentId::ExBlesa => "ex-blesa",
            ExperimentId::ExBetaEqAlpha => "ex-beta-eq-alpha",
            ExperimentId::ExSpherical => "ex-spherical",
            ExperimentId::ExNotstrong => "ex-notstrong",
            ExperimentId::ExApnot => "ex-apnot",
            ExperimentId::ExGrowthnec => "ex-growthnec",
            ExperimentId::ThmFsFailure => "thm-fs-failure",
            ExperimentId::MfLower => "mf-lower",
            ExperimentId::TreeWeak11 => "tree-weak11",
            ExperimentId::Kolmogorov => "kolmogorov",
            ExperimentId::VectorValued => "vector-valued",
        }
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment id {s:?}")))
    }
}

/// `(J_max, N_max)` pairs for stability runs: canonical ratio 25/80 at 60 and 120.
pub const STABILITY_GRIDS: [(usize, usize); 2] = [(60, 19), (120, 38)];

fn radial(weight: WeightSpec, checker: CheckerSpec, j_max: usize, n_max: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(checker);
    c.weight = weight;
    c.grid = GridConfig {
        j_max,
        n_max,
        normalization: Normalization::Scalar,
    };
    c
}

/// Runs at each grid of `grids` and marks the first report by its drift to the last.
pub fn stability(weight: WeightSpec, checker: CheckerSpec, grids: [(usize, usize); 2]) -> Result<CheckReport> {
    let [(j0, n0), (j1, n1)] = grids;
    let coarse = run_checker(&radial(weight.clone(), checker.clone(), j0, n0))?;
    let fine = run_checker(&radial(weight, checker, j1, n1))?;
    let mismatch = coarse.meta.contains_key("witness_mismatch");
    let mut r = coarse.with_drift(&fine).with_meta("refined_j_max", j1).with_meta("refined_n_max", n1);
    if mismatch {
        r.verdict = Verdict::Fail;
    }
    Ok(r)
}

fn row(params: &[&str], report: CheckReport) -> Row {
    Row {
        params: params.iter().map(|s| s.to_string()).collect(),
        report,
    }
}

fn exp_radial(gamma: f64) -> WeightSpec {
    WeightSpec::ExpRadial { gamma }
}

fn fs_family(k: usize, js: std::ops::RangeInclusive<usize>) -> Result<Vec<CheckReport>> {
    js.map(|j| {
        run_checker(&radial(
            exp_radial(-1.0),
            CheckerSpec::FsRatio {
                s: None,
                k: Some(k),
                f: FunctionSpec::Indicator { j },
                lambda: Default::default(),
            },
            FS_GRID.0,
            FS_GRID.1,
        ))
    })
    .collect()
}

/// Grid for the Fefferman–Stein families: the `k = 2` iterate still covers `j = 40`.
pub const FS_GRID: (usize, usize) = (140, 45);
/// Grids for the weak/strong pair.
pub const NOTSTRONG_GRIDS: [(usize, usize); 2] = [(130, 65), (140, 70)];
/// Grid for the maximal lower bound; `N_max` must reach `j = 30`.
pub const MF_LOWER_GRID: (usize, usize) = (80, 30);
/// Relative tolerance on fitted rates.
pub const RATE_RTOL: f64 = 0.1;

fn notstrong_weight() -> WeightSpec {
    WeightSpec::EtaProduct {
        base: Box::new(WeightSpec::ExpStrong { p: 2.0 }),
    }
}

/// Canonical tree parameters.
pub const TREE_DEPTH: usize = 8;
pub const TREE_BATCH: usize = 100;

fn tree_cfg(k: usize, checker: CheckerSpec, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(checker);
    c.backend = BackendConfig::Tree { k, depth: TREE_DEPTH };
    c.seed = seed;
    c
}

/// Spread `max / min` of a batch of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn all_pass(rows: &[Row]) -> bool {
    rows.iter().all(|r| r.report.verdict != Verdict::Fail)
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Runs a named experiment.
pub fn reproduce(id: ExperimentId, seed: u64) -> Result<Outcome> {
    let mut summary = BTreeMap::new();
    let mut names = vec!["case"];
    let mut rows = Vec::new();
    let ok = match id {
        ExperimentId::ExTrivial => {
            let (j, n) = (80, 25);
            let msw = run_checker(&radial(WeightSpec::Constant, CheckerSpec::Msw { s: 2.0 }, j, n))?;
            let band_ok = msw.constant <= 4.0;
            rows.push(row(&["msw-s2"], msw));
            rows.push(row(
                &["necessary-p2"],
                run_checker(&radial(
                    WeightSpec::Constant,
                    CheckerSpec::Necessary {
                        p: 2.0,
                        family: FamilyConfig::Default,
                    },
                    j,
                    n,
                ))?,
            ));
            rows.push(row(
                &["ap-loc-p2"],
                run_checker(&radial(WeightSpec::Constant, CheckerSpec::ApLoc { p: 2.0, step: 0.1 }, j, n))?,
            ));
            summary.insert("msw_band".into(), json!(4.0));
            band_ok && all_pass(&rows)
        }
        ExperimentId::ExBlesa => {
            for (gamma, s, label) in [(-0.3, 2.0, "gamma-0.3-s2"), (-0.5, 2.0, "gamma-0.5-s2"), (-1.0, 1.0, "gamma-1-s1")] {
                rows.push(row(&[label], stability(exp_radial(gamma), CheckerSpec::Msw { s }, STABILITY_GRIDS)?));
            }
            all_pass(&rows)
        }
        ExperimentId::ExBetaEqAlpha => {
            let w = WeightSpec::ExpStrong { p: 2.0 };
            rows.push(row(
                &["easy-check-p2-eta-1"],
                stability(w.clone(), CheckerSpec::EasyCheck { p: 2.0, eta: -1.0 }, STABILITY_GRIDS)?,
            ));
            rows.push(row(
                &["large-scale-p2-half"],
                stability(
                    w,
                    CheckerSpec::LargeScale {
                        p: 2.0,
                        alpha: 0.5,
                        beta: 0.5,
                        family: FamilyConfig::Default,
                    },
                    STABILITY_GRIDS,
                )?,
            ));
            all_pass(&rows)
        }
        ExperimentId::ExSpherical => {
            rows.push(row(
                &["spherical-u-p2-easy-check"],
                stability(
                    WeightSpec::SphericalU { p: 2.0 },
                    CheckerSpec::EasyCheck { p: 2.0, eta: -1.0 },
                    STABILITY_GRIDS,
                )?,
            ));
            for (gamma, label) in [(-0.3, "jacobi-v-gamma-0.3-msw"), (-0.45, "jacobi-v-gamma-0.45-msw")] {
                rows.push(row(
                    &[label],
                    stability(WeightSpec::JacobiV { gamma }, CheckerSpec::Msw { s: 2.0 }, STABILITY_GRIDS)?,
                ));
            }
            summary.insert(
                "not_applicable".into(),
                json!({
                    "jacobi-v-gamma-0.5": "theta = -1 puts lambda on the pole of the second solution",
                    "jacobi-v-gamma-1": "outside the family range [-1/2, 0)",
                }),
            );
            all_pass(&rows)
        }
        ExperimentId::ExNotstrong => {
            let f = FunctionSpec::Indicator { j: 1 };
            let weak = stability(
                notstrong_weight(),
                CheckerSpec::WeakType {
                    p: 2.0,
                    f: f.clone(),
                    lambda: Default::default(),
                },
                NOTSTRONG_GRIDS,
            )?;
            let (j, n) = NOTSTRONG_GRIDS[1];
            let strong = run_checker(&radial(
                notstrong_weight(),
                CheckerSpec::StrongType {
                    p: 2.0,
                    f,
                    cut_lo: 20,
                    cut_hi: 60,
                },
                j,
                n,
            ))?;
            let slope = strong.slope.unwrap_or(f64::NAN);
            let r2 = strong.r2.unwrap_or(f64::NAN);
            let unbounded = slope > 0.0 && r2 >= 0.99;
            summary.insert("strong_slope".into(), json!(slope));
            summary.insert("strong_r2".into(), json!(r2));
            summary.insert("strong_unbounded".into(), json!(unbounded));
            let weak_ok = weak.verdict == Verdict::Pass;
            rows.push(row(&["weak-p2"], weak));
            rows.push(row(&["strong-p2"], strong));
            weak_ok && unbounded
        }
        ExperimentId::ExApnot => {
            let (gamma, p) = (-0.75, 2.0);
            let r = run_checker(&radial(
                exp_radial(gamma),
                CheckerSpec::ClassicalAp { p, j_lo: 5, j_hi: 35 },
                80,
                25,
            ))?;
            let rho = crate::geometry::SpaceParams::canonical().rho;
            let target = -2.0 * rho * (2.0 * gamma + 1.0);
            let slope = r.slope.unwrap_or(f64::NAN);
            let ok = (slope - target).abs() <= RATE_RTOL * target.abs();
            summary.insert("target_slope".into(), json!(target));
            summary.insert("slope".into(), json!(slope));
            rows.push(row(&["gamma-0.75-p2"], r));
            ok
        }
        ExperimentId::ExGrowthnec => {
            let w = exp_radial(-1.0);
            rows.push(row(
                &["necessary-p2"],
                stability(
                    w.clone(),
                    CheckerSpec::Necessary {
                        p: 2.0,
                        family: FamilyConfig::Default,
                    },
                    STABILITY_GRIDS,
                )?,
            ));
            rows.push(row(
                &["large-scale-p2-one"],
                stability(
                    w,
                    CheckerSpec::LargeScale {
                        p: 2.0,
                        alpha: 1.0,
                        beta: 1.0,
                        family: FamilyConfig::Default,
                    },
                    STABILITY_GRIDS,
                )?,
            ));
            all_pass(&rows)
        }
        ExperimentId::ThmFsFailure => {
            names = vec!["k", "j"];
            let mut ok = true;
            for k in [1usize, 2] {
                let reports = fs_family(k, 10..=40)?;
                let c: Vec<f64> = reports.iter().map(|r| r.constant).collect();
                let growth = c[30] / c[0];
                let increasing = c.windows(2).all(|w| w[1] > w[0]);
                let band: Vec<f64> = c.iter().zip(10..).map(|(v, j)| v / j as f64).collect();
                let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = band.iter().cloned().fold(0.0, f64::max);
                let xs: Vec<f64> = (10..=40).map(|j| j as f64).collect();
                let lin = fit::linear_fit(&xs, &c)?;
                summary.insert(
                    format!("k{k}"),
                    json!({
                        "c40_over_c10": growth,
                        "increasing": increasing,
                        "c_over_j_band": [lo, hi],
                        "linear_slope": lin.slope,
                        "linear_r2": lin.r2,
                    }),
                );
                ok &= growth >= 3.0 && increasing;
                let ks = k.to_string();
                for (r, j) in reports.into_iter().zip(10..) {
                    rows.push(row(&[&ks, &j.to_string()], r));
                }
            }
            ok && all_pass(&rows)
        }
        ExperimentId::MfLower => {
            let (j_max, n_max) = MF_LOWER_GRID;
            let cfg = radial(WeightSpec::Constant, CheckerSpec::Msw { s: 2.0 }, j_max, n_max);
            let model = cfg.model()?;
            let mf = model.maximal_dis(&RadialFunction::indicator(j_max, 1)?)?;
            let (lo, hi) = (5, 30);
            let xs: Vec<f64> = (lo..=hi).map(|j| j as f64).collect();
            let ys: Vec<f64> = (lo..=hi).map(|j| mf.values[j - 1]).collect();
            let f = fit::log_slope(&xs, &ys)?;
            let target = -2.0 * model.grid.params.rho;
            let ok = (f.slope - target).abs() <= RATE_RTOL * target.abs();
            let mut r = CheckReport::new(
                "mf-lower",
                f.slope,
                crate::checkers::Witness {
                    annuli: vec![lo, hi],
                    ..Default::default()
                },
            )
            .with_meta("target_slope", target)
            .with_meta("values", &ys)
            .with_meta("j_max", j_max)
            .with_meta("n_max", n_max);
            r.slope = Some(f.slope);
            r.r2 = Some(f.r2);
            r.verdict = verdict(ok);
            rows.push(row(&["indicator-1"], r));
            ok
        }
        ExperimentId::TreeWeak11 => {
            names = vec!["k"];
            let mut consts = Vec::new();
            for k in [2usize, 3, 4] {
                let r = run_checker(&tree_cfg(
                    k,
                    CheckerSpec::TreeWeak11 {
                        count: TREE_BATCH,
                        exclude_boundary: true,
                    },
                    seed,
                ))?;
                consts.push(r.constant);
                rows.push(row(&[&k.to_string()], r));
            }
            let sp = spread(&consts);
            summary.insert("spread".into(), json!(sp));
            sp < 2.0 && all_pass(&rows)
        }
        ExperimentId::Kolmogorov => {
            names = vec!["q"];
            for q in [0.3, 0.5, 0.7] {
                let r = run_checker(&tree_cfg(2, CheckerSpec::TreeKolmogorov { q, count: TREE_BATCH }, seed))?;
                rows.push(row(&[&q.to_string()], r));
            }
            all_pass(&rows)
        }
        ExperimentId::VectorValued => {
            names = vec!["seed"];
            let mut ratios = Vec::new();
            for s in seed..seed + 10 {
                let r = run_checker(&tree_cfg(
                    2,
                    CheckerSpec::VectorValued {
                        p: 3.0,
                        r: 2.0,
                        count: 20,
                    },
                    s,
                ))?;
                ratios.push(r.constant);
                rows.push(row(&[&s.to_string()], r));
            }
            let sp = spread(&ratios);
            summary.insert("spread".into(), json!(sp));
            sp < 2.0 && all_pass(&rows)
        }
    };
    summary.insert("drift_tol".into(), json!(DRIFT_TOL));
    Ok(Outcome {
        id: id.as_str().to_string(),
        seed,
        verdict: verdict(ok),
        param_names: names.into_iter().map(str::to_string).collect(),
        summary,
        rows,
    })
}
