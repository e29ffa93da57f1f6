//! Experiment results and their on-disk form: one CSV per table (every row led by
//! the settings hash), `summary.json` and `run.log`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
}

/// An asserted invariant: `value` compared against `limit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Builds a CSV row from displayable values.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub log: Vec<String>,
}

impl Outcome {
    pub fn metric(&mut self, key: &str, v: impl Into<Value>) {
        self.metrics.insert(key.into(), v.into());
    }

    /// Records `value ≤ limit` (NaN fails).
    pub fn check_le(&mut self, name: &str, value: f64, limit: f64, detail: impl Display) {
        self.checks.push(Check {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
            detail: detail.to_string(),
        });
    }

    pub fn check(&mut self, name: &str, passed: bool, value: f64, detail: impl Display) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            value,
            limit: f64::NAN,
            detail: detail.to_string(),
        });
    }

    pub fn note(&mut self, line: impl Display) {
        self.log.push(line.to_string());
    }

    pub fn status(&self) -> Status {
        if self.checks.is_empty() {
            Status::ReportOnly
        } else if self.checks.iter().all(|c| c.passed) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub settings_hash: String,
    pub seed: u64,
    pub params: BTreeMap<String, Value>,
    pub status: Status,
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn new(config: &ExperimentConfig, outcome: &Outcome) -> Self {
        Self {
            command: config.command.clone(),
            settings_hash: config.settings_hash(),
            seed: config.seed,
            params: config.params.clone(),
            status: outcome.status(),
            metrics: outcome.metrics.clone(),
            checks: outcome.checks.clone(),
        }
    }
}

/// Serializes a table as RFC 4180 CSV with a leading `settings_hash` column.
pub fn table_to_csv(table: &Table, hash: &str) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["settings_hash".to_string()];
    header.extend(table.header.iter().cloned());
    w.write_record(&header)?;
    for row in &table.rows {
        w.write_record(std::iter::once(hash).chain(row.iter().map(String::as_str)))?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

/// Writes every artifact into `dir` and returns the paths of the CSV files.
pub fn write_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    outcome: &Outcome,
    summary: &Summary,
) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir)?;
    let hash = config.settings_hash();
    let mut written = Vec::new();
    for t in &outcome.tables {
        let path = dir.join(format!("{}.csv", t.name));
        fs::write(&path, table_to_csv(t, &hash)?)?;
        written.push(path);
    }
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    fs::write(dir.join("summary.json"), json)?;
    let mut log = format!("command {} settings {}\n", config.command, hash);
    for line in &outcome.log {
        log.push_str(line);
        log.push('\n');
    }
    for c in &outcome.checks {
        log.push_str(&format!(
            "check {} {}: value {} limit {} ({})\n",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.value,
            c.limit,
            c.detail
        ));
    }
    fs::write(dir.join("run.log"), log)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_carry_hash_and_quote() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(row![1.5, "p, q"]);
        let text = String::from_utf8(table_to_csv(&t, "abc").unwrap()).unwrap();
        assert_eq!(text, "settings_hash,a,b\nabc,1.5,\"p, q\"\n");
    }

    #[test]
    fn status_rules() {
        let mut o = Outcome::default();
        assert_eq!(o.status(), Status::ReportOnly);
        o.check_le("a", 1.0, 2.0, "");
        assert_eq!(o.status(), Status::Pass);
        o.check_le("b", f64::NAN, 2.0, "");
        assert_eq!(o.status(), Status::Fail);
    }
}
