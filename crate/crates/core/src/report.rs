//! Tables, criterion lines and the artifacts written for every suite run.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::{margin_audit, ExperimentConfig, MarginAudit};
use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self { name: name.into(), headers: headers.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting, so identical runs give identical files.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionLine {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CriterionLine {
    pub fn line(&self) -> String {
        format!("{} criterion {:>2} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub criteria: Vec<CriterionLine>,
    /// Suite-level checks that are not acceptance criteria (name, pass, detail).
    pub checks: Vec<(String, bool, String)>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub extra_files: Vec<(String, String)>,
    pub runtime_seconds: f64,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        Self { suite: suite.into(), criteria: Vec::new(), checks: Vec::new(), tables: Vec::new(), extra_files: Vec::new(), runtime_seconds: 0.0 }
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass) && self.checks.iter().all(|c| c.1)
    }

    pub fn criterion(&mut self, id: u8, name: &str, pass: bool, detail: String) {
        self.criteria.push(CriterionLine { id, name: name.into(), pass, detail });
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push((name.into(), pass, detail));
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.criteria.iter().map(|c| c.line()).collect();
        out.extend(self.checks.iter().map(|(n, p, d)| format!("{} check {}: {}", if *p { "PASS" } else { "FAIL" }, n, d)));
        out
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    suite: &'a str,
    config_hash: String,
    model: String,
    grid: &'a crate::config::GridConfig,
    margin_audit: Vec<MarginAudit>,
    passed: bool,
    report: &'a SuiteReport,
}

/// Writes `<suite>_<table>.csv` for every table, any extra files and `<suite>_summary.json`.
pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, rep: &SuiteReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in &rep.tables {
        t.write_csv(&dir.join(format!("{}_{}.csv", rep.suite, t.name)))?;
    }
    for (name, text) in &rep.extra_files {
        fs::write(dir.join(name), text)?;
    }
    let s = Summary {
        suite: &rep.suite,
        config_hash: cfg.hash(),
        model: format!("{:?}", cfg.model.id).to_lowercase(),
        grid: &cfg.grid,
        margin_audit: margin_audit(cfg),
        passed: rep.passed(),
        report: rep,
    };
    fs::write(dir.join(format!("{}_summary.json", rep.suite)), serde_json::to_string_pretty(&s)?)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(())
}
