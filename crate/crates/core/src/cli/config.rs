use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkers::{FamilySpec, LambdaGrid};
use crate::error::{Error, Result};
use crate::geometry::{AnnularGrid, Normalization, SpaceParams};
use crate::radialops::{RadialFunction, RadialModel};
use crate::treelab::TreeSpace;
use crate::weights::WeightSpec;

/// Space parameters, either `(m, k)` or Jacobi indices `(σ, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceConfig {
    Mk(MkSpace),
    Jacobi(JacobiSpace),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MkSpace {
    pub m: u32,
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiSpace {
    pub sigma: f64,
    pub tau: f64,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig::Mk(MkSpace { m: 2, k: 1 })
    }
}

impl SpaceConfig {
    pub fn params(&self) -> Result<SpaceParams> {
        match *self {
            SpaceConfig::Mk(MkSpace { m, k }) => SpaceParams::from_mk(m, k),
            SpaceConfig::Jacobi(JacobiSpace { sigma, tau }) => SpaceParams::from_jacobi(sigma, tau),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub normalization: Normalization,
}

fn default_j_max() -> usize {
    80
}

fn default_n_max() -> usize {
    25
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            j_max: default_j_max(),
            n_max: default_n_max(),
            normalization: Normalization::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    #[default]
    Radial,
    Tree {
        #[serde(default = "default_tree_k")]
        k: usize,
        #[serde(default = "default_tree_depth")]
        depth: usize,
    },
}

fn default_tree_k() -> usize {
    2
}

fn default_tree_depth() -> usize {
    8
}

/// Test-set family; random unions draw from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    Singletons,
    Dyadic,
    #[default]
    Default,
    RandomUnions { count: usize },
}

impl FamilyConfig {
    pub fn spec(self, seed: u64) -> FamilySpec {
        match self {
            FamilyConfig::Singletons => FamilySpec::Singletons,
            FamilyConfig::Dyadic => FamilySpec::Dyadic,
            FamilyConfig::Default => FamilySpec::Default,
            FamilyConfig::RandomUnions { count } => FamilySpec::RandomUnions { seed, count },
        }
    }

    pub fn is_random(self) -> bool {
        matches!(self, FamilyConfig::RandomUnions { .. })
    }
}

/// A radial test function on the annuli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `χ_{Ω_j}`.
    Indicator { j: usize },
    /// Values on `Ω_1, Ω_2, ...`, zero beyond.
    Values { values: Vec<f64> },
}

impl FunctionSpec {
    pub fn build(&self, j_max: usize) -> Result<RadialFunction> {
        match self {
            FunctionSpec::Indicator { j } => RadialFunction::indicator(j_max, *j),
            FunctionSpec::Values { values } => {
                if values.len() > j_max {
                    return Err(Error::Config(format!("{} values exceed J_max = {j_max}", values.len())));
                }
                let mut v = values.clone();
                v.resize(j_max, 0.0);
                RadialFunction::new(v)
            }
        }
    }
}

fn default_eta() -> f64 {
    -1.0
}

fn default_step() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

/// Checker identifier and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckerSpec {
    ApLoc {
        p: f64,
        #[serde(default = "default_step")]
        step: f64,
    },
    LargeScale {
        p: f64,
        alpha: f64,
        beta: f64,
        #[serde(default)]
        family: FamilyConfig,
    },
    Necessary {
        p: f64,
        #[serde(default)]
        family: FamilyConfig,
    },
    EasyCheck {
        p: f64,
        #[serde(default = "default_eta")]
        eta: f64,
    },
    Msw {
        s: f64,
    },
    ClassicalAp {
        p: f64,
        j_lo: usize,
        j_hi: usize,
    },
    WeakType {
        p: f64,
        f: FunctionSpec,
        #[serde(default)]
        lambda: LambdaGrid,
    },
    StrongType {
        p: f64,
        f: FunctionSpec,
        cut_lo: usize,
        cut_hi: usize,
    },
    /// Majorant `M_s w` when `s` is set, `M^(k) w` when `k` is set.
    FsRatio {
        #[serde(default)]
        s: Option<f64>,
        #[serde(default)]
        k: Option<usize>,
        f: FunctionSpec,
        #[serde(default)]
        lambda: LambdaGrid,
    },
    VectorValued {
        p: f64,
        r: f64,
        count: usize,
    },
    TreeWeak11 {
        count: usize,
        #[serde(default = "default_true")]
        exclude_boundary: bool,
    },
    TreeKolmogorov {
        q: f64,
        count: usize,
    },
}

impl CheckerSpec {
    pub fn id(&self) -> &'static str {
        match self {
            CheckerSpec::ApLoc { .. } => "ap-loc",
            CheckerSpec::LargeScale { .. } => "large-scale",
            CheckerSpec::Necessary { .. } => "necessary",
            CheckerSpec::EasyCheck { .. } => "easy-check",
            CheckerSpec::Msw { .. } => "msw",
            CheckerSpec::ClassicalAp { .. } => "classical-ap",
            CheckerSpec::WeakType { .. } => "weak-type",
            CheckerSpec::StrongType { .. } => "strong-type",
            CheckerSpec::FsRatio { .. } => "fs-ratio",
            CheckerSpec::VectorValued { .. } => "vector-valued",
            CheckerSpec::TreeWeak11 { .. } => "tree-weak11",
            CheckerSpec::TreeKolmogorov { .. } => "tree-kolmogorov",
        }
    }

    /// Whether the result depends on the run seed.
    pub fn is_random(&self) -> bool {
        match self {
            CheckerSpec::LargeScale { family, .. } | CheckerSpec::Necessary { family, .. } => family.is_random(),
            CheckerSpec::VectorValued { .. } | CheckerSpec::TreeWeak11 { .. } | CheckerSpec::TreeKolmogorov { .. } => {
                true
            }
            _ => false,
        }
    }

    fn needs_tree(&self) -> bool {
        matches!(self, CheckerSpec::TreeWeak11 { .. } | CheckerSpec::TreeKolmogorov { .. })
    }

    fn tree_capable(&self) -> bool {
        self.needs_tree() || matches!(self, CheckerSpec::VectorValued { .. })
    }
}

/// A declared sweep axis: `path` is a dotted path into the config, with bare
/// names resolved inside `checker`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<Value>,
}

impl Axis {
    pub fn segments(&self) -> Vec<String> {
        let mut segs: Vec<String> = self.path.split('.').map(str::to_string).collect();
        if segs.len() == 1 {
            segs.insert(0, "checker".into());
        }
        segs
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Report file stem; defaults to the checker id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_weight")]
    pub weight: WeightSpec,
    pub checker: CheckerSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_weight() -> WeightSpec {
    WeightSpec::Constant
}

impl ExperimentConfig {
    pub fn new(checker: CheckerSpec) -> Self {
        ExperimentConfig {
            space: SpaceConfig::default(),
            grid: GridConfig::default(),
            backend: BackendConfig::default(),
            weight: default_weight(),
            checker,
            seed: 0,
            axes: Vec::new(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn name(&self) -> String {
        self.output.name.clone().unwrap_or_else(|| self.checker.id().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.space.params().map_err(|e| Error::Config(e.to_string()))?;
        let g = self.grid;
        if g.j_max < 2 || g.n_max == 0 || g.n_max + 1 > g.j_max {
            return bad(format!("grid needs 1 <= n_max < j_max, got j_max = {}, n_max = {}", g.j_max, g.n_max));
        }
        match self.backend {
            BackendConfig::Tree { .. } if !self.checker.tree_capable() => {
                return bad(format!("checker {} runs on the radial backend only", self.checker.id()))
            }
            BackendConfig::Radial if self.checker.needs_tree() => {
                return bad(format!("checker {} needs the tree backend", self.checker.id()))
            }
            _ => {}
        }
        if let CheckerSpec::FsRatio { s, k, .. } = self.checker {
            if s.is_some() == k.is_some() {
                return bad("fs-ratio needs exactly one of s and k".into());
            }
        }
        if let Some(name) = &self.output.name {
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return bad(format!("output name {name:?} must be a plain file stem"));
            }
        }
        for a in &self.axes {
            if a.values.is_empty() {
                return bad(format!("axis {} has no values", a.path));
            }
            if a.path.is_empty() || a.path.split('.').any(str::is_empty) {
                return bad(format!("axis path {:?} is malformed", a.path));
            }
            if a.segments()[0] == "axes" {
                return bad("axes cannot sweep themselves".into());
            }
        }
        Ok(())
    }

    pub fn space_params(&self) -> Result<SpaceParams> {
        self.space.params()
    }

    pub fn annular_grid(&self) -> Result<Arc<AnnularGrid>> {
        Ok(Arc::new(AnnularGrid::new(self.space_params()?, self.grid.j_max)?))
    }

    pub fn model(&self) -> Result<RadialModel> {
        RadialModel::new(self.annular_grid()?, self.grid.n_max, self.grid.normalization)
    }

    pub fn tree(&self) -> Result<TreeSpace> {
        match self.backend {
            BackendConfig::Tree { k, depth } => TreeSpace::new(k, depth),
            BackendConfig::Radial => Err(Error::Config("no tree backend configured".into())),
        }
    }
}

/// Sets `segs` inside `root`, creating missing parent objects.
pub(crate) fn patch(root: &mut Value, segs: &[String], v: Value) -> Result<()> {
    let (last, parents) = segs.split_last().ok_or_else(|| Error::Config("empty axis path".into()))?;
    let mut cur = root;
    for s in parents {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("axis path component {s:?} is not inside an object")))?;
        cur = obj.entry(s.clone()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("axis parent of {last:?} is not an object")))?;
    obj.insert(last.clone(), v);
    Ok(())
}
