use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, RunConfig};

/// Aggregate of one named check over all instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub instances: usize,
    /// Largest deviation from the oracle; identity checks only.
    pub max_abs_error: Option<f64>,
    /// Smallest `lhs - rhs`; bound checks only.
    pub min_slack: Option<f64>,
    pub masked_weight_max: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn identity(name: &str, instances: usize, max_abs_error: f64, masked: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            instances,
            max_abs_error: Some(max_abs_error),
            min_slack: None,
            masked_weight_max: masked,
            threshold,
            pass: max_abs_error <= threshold,
        }
    }

    pub fn bound(name: &str, instances: usize, min_slack: f64, masked: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            instances,
            max_abs_error: None,
            min_slack: Some(min_slack),
            masked_weight_max: masked,
            threshold,
            pass: min_slack >= -threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub config: RunConfig,
    pub records: Vec<CheckRecord>,
    pub pass: bool,
    pub runtime_seconds: f64,
}

impl SuiteReport {
    pub fn new(config: RunConfig, records: Vec<CheckRecord>, runtime_seconds: f64) -> Self {
        let pass = records.iter().all(|r| r.pass);
        Self {
            config,
            records,
            pass,
            runtime_seconds,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,instances,max_abs_error,min_slack,masked_weight_max,threshold,pass\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{:e},{}",
                r.name,
                r.instances,
                opt(r.max_abs_error),
                opt(r.min_slack),
                r.masked_weight_max,
                r.threshold,
                r.pass
            );
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<28} {:>9} {:>12} {:>12} {:>6}\n", "check", "instances", "max_error", "min_slack", "");
        for r in &self.records {
            let cell = |v: Option<f64>| v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<28} {:>9} {:>12} {:>12} {:>6}",
                r.name,
                r.instances,
                cell(r.max_abs_error),
                cell(r.min_slack),
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(out, "overall: {} ({:.2}s)", if self.pass { "PASS" } else { "FAIL" }, self.runtime_seconds);
        out
    }
}

/// Writes `contents` to `dir/name`, creating the directory.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

/// Writes a serializable summary as `stem.json` or a CSV body as `stem.csv`.
pub fn write_report<T: Serialize>(cfg: &RunConfig, stem: &str, value: &T, csv: &str) -> std::io::Result<PathBuf> {
    match cfg.format {
        Format::Json => write_artifact(
            &cfg.output_dir,
            &format!("{stem}.json"),
            &(serde_json::to_string_pretty(value).expect("serializable report") + "\n"),
        ),
        Format::Csv => write_artifact(&cfg.output_dir, &format!("{stem}.csv"), csv),
    }
}
