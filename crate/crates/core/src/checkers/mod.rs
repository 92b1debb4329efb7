//! Weight-condition checks and inequality-ratio estimators.
//!
//! Every check implements [`Condition`]: `run` scans its configurations and
//! reports the supremum with the configuration attaining it, and `evaluate`
//! recomputes the quantity at a single witness so reports can be audited.

mod conditions;
mod family;
mod inequalities;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use conditions::{ApLoc, ClassicalAp, EasyCheck, LargeScale, Msw};
pub use family::{FamilySpec, SetFamily};
pub use inequalities::{
    FsRatio, Iterated, LambdaGrid, StrongType, TreeKolmogorov, TreeWeak11, VectorValued, VectorBackend,
    WeakType,
};

/// Relative tolerance for witness re-evaluation.
pub const WITNESS_RTOL: f64 = 1e-10;
/// Allowed relative drift under grid refinement.
pub const DRIFT_TOL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Observation only; nothing is asserted.
    Info,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
        }
    }
}

/// Configuration attaining a reported constant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Witness {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub e: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annuli: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Radial interval `[a, b]` for continuum checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    /// Tree vertices as root paths.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<String>,
    /// Position in a batch of test functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    pub constant: f64,
    pub witness: Witness,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub verdict: Verdict,
    pub meta: BTreeMap<String, Value>,
}

impl CheckReport {
    pub fn new(id: impl Into<String>, constant: f64, witness: Witness) -> Self {
        let verdict = if constant.is_finite() { Verdict::Pass } else { Verdict::Fail };
        CheckReport {
            id: id.into(),
            constant,
            witness,
            slope: None,
            r2: None,
            verdict,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        self.meta.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Header matching [`CheckReport::csv_row`] with the given parameter columns.
    pub fn csv_header(params: &[&str]) -> String {
        let mut cols = vec!["id"];
        cols.extend_from_slice(params);
        cols.extend_from_slice(&["constant", "slope", "r2", "verdict"]);
        cols.join(",")
    }

    pub fn csv_row(&self, params: &[String]) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut cols = vec![self.id.clone()];
        cols.extend(params.iter().cloned());
        cols.push(format!("{:e}", self.constant));
        cols.push(opt(self.slope));
        cols.push(opt(self.r2));
        cols.push(self.verdict.as_str().to_string());
        cols.join(",")
    }

    /// Marks the report against a refined rerun: pass iff both constants are
    /// finite and their relative drift stays below [`DRIFT_TOL`].
    pub fn with_drift(mut self, refined: &CheckReport) -> Self {
        let drift = relative_drift(self.constant, refined.constant);
        self.verdict = if drift < DRIFT_TOL { Verdict::Pass } else { Verdict::Fail };
        self.with_meta("refined_constant", refined.constant).with_meta("drift", drift)
    }
}

/// `|b - a| / |a|`, infinite when either side is not finite.
pub fn relative_drift(a: f64, b: f64) -> f64 {
    if !(a.is_finite() && b.is_finite()) {
        return f64::INFINITY;
    }
    if a == b {
        return 0.0;
    }
    (b - a).abs() / a.abs()
}

/// A check whose reported constant is a supremum over witnesses.
pub trait Condition {
    fn id(&self) -> String;

    /// The scanned quantity at one configuration.
    fn evaluate(&self, witness: &Witness) -> Result<f64>;

    fn run(&self) -> Result<CheckReport>;

    /// Re-evaluates the witness of `report`, returning the relative deviation.
    fn reproduce(&self, report: &CheckReport) -> Result<f64> {
        let v = self.evaluate(&report.witness)?;
        Ok(relative_drift(report.constant, v))
    }
}

/// Keeps the largest finite value, first occurrence on ties.
#[derive(Debug, Clone)]
pub(crate) struct Best {
    pub value: f64,
    pub witness: Witness,
    pub skipped: usize,
}

impl Best {
    pub fn new() -> Self {
        Best {
            value: f64::NEG_INFINITY,
            witness: Witness::default(),
            skipped: 0,
        }
    }

    pub fn offer(&mut self, value: f64, witness: impl FnOnce() -> Witness) {
        if value.is_nan() {
            self.skipped += 1;
        } else if value > self.value {
            self.value = value;
            self.witness = witness();
        }
    }

    pub fn merge(mut self, other: Best) -> Best {
        self.skipped += other.skipped;
        if other.value > self.value {
            self.value = other.value;
            self.witness = other.witness;
        }
        self
    }

    pub fn finish(self, id: String) -> Result<CheckReport> {
        if self.value == f64::NEG_INFINITY {
            return Err(Error::Unsupported(format!("{id}: no admissible configuration")));
        }
        Ok(CheckReport::new(id, self.value, self.witness).with_meta("skipped", self.skipped))
    }
}

pub(crate) fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::domain(format!("witness lacks {what}")))
}
