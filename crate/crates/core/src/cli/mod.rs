//! Experiment configuration, named experiment drivers and report files.

pub mod config;
pub mod experiments;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkers::{CheckReport, Verdict};
use crate::error::Result;

pub use config::ExperimentConfig;
pub use experiments::{reproduce, run_checker, sweep, ExperimentId};

/// Environment variable naming the report directory.
pub const OUT_DIR_VAR: &str = "NALAB_OUT";
pub const DEFAULT_OUT_DIR: &str = "nalab-out";

/// Report directory from [`OUT_DIR_VAR`], else [`DEFAULT_OUT_DIR`].
pub fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_VAR)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub params: Vec<String>,
    pub report: CheckReport,
}

/// Result of a sweep or named experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub param_names: Vec<String>,
    pub summary: BTreeMap<String, Value>,
    pub rows: Vec<Row>,
}

impl Outcome {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = self.param_names.iter().map(String::as_str).collect();
        let mut s = CheckReport::csv_header(&names);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.report.csv_row(&r.params));
            s.push('\n');
        }
        s
    }

    /// Writes `<id>.json` and `<id>.csv` into `dir`, returning both paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.id));
        let csv = dir.join(format!("{}.csv", self.id));
        std::fs::write(&json, self.to_json()?)?;
        std::fs::write(&csv, self.to_csv())?;
        Ok((json, csv))
    }

    /// 0 unless the verdict is a failure.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Fail => 1,
            Verdict::Pass | Verdict::Info => 0,
        }
    }
}
