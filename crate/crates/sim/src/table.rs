//! Result tables and their CSV / JSON emission.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

/// One measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    /// Name of the independent variable.
    pub variable: String,
    pub x: f64,
    pub metric: String,
    pub value: f64,
    pub trials: u64,
    /// Half-width of the 95% confidence interval, 0 when not applicable.
    pub ci_half_width: f64,
    pub config_hash: String,
}

/// Rows of one or more experiments, all produced from one configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Auxiliary file produced alongside a table (maps, profiles).
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Run metadata written next to each table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config_hash: String,
    pub seed: u64,
    pub experiments: Vec<String>,
    pub crate_version: String,
    pub rows: usize,
    pub elapsed_s: f64,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    /// First row with the given metric at `x`.
    pub fn value(&self, metric: &str, x: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.x == x)
            .map(|r| r.value)
    }

    /// `(x, value)` pairs of one metric, in insertion order.
    pub fn series(&self, metric: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.x, r.value))
            .collect()
    }

    pub fn to_csv(&self) -> SimResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "experiment",
                "variable",
                "x",
                "metric",
                "value",
                "trials",
                "ci_half_width",
                "config_hash",
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| SimError::io("<csv buffer>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> SimResult<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
        Ok(Self { rows })
    }
}

/// Builder for rows sharing experiment and configuration hash.
#[derive(Debug, Clone)]
pub struct RowSink {
    experiment: String,
    hash: String,
    pub table: ResultTable,
}

impl RowSink {
    pub fn new(experiment: &str, hash: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            hash: hash.to_string(),
            table: ResultTable::new(),
        }
    }

    pub fn push(&mut self, variable: &str, x: f64, metric: &str, value: f64, trials: u64, ci: f64) {
        self.table.rows.push(ResultRow {
            experiment: self.experiment.clone(),
            variable: variable.to_string(),
            x,
            metric: metric.to_string(),
            value,
            trials,
            ci_half_width: ci,
            config_hash: self.hash.clone(),
        });
    }
}

/// 95% normal-approximation half-width of a proportion.
pub fn proportion_ci(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.96 * (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Writes `<stem>.csv`, `<stem>.json` and the artifacts into `dir`.
pub fn write_outputs(
    dir: &Path,
    stem: &str,
    table: &ResultTable,
    sidecar: &Sidecar,
    artifacts: &[Artifact],
) -> SimResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: &str| -> SimResult<()> {
        let p = dir.join(name);
        std::fs::write(&p, contents).map_err(|e| SimError::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    put(format!("{stem}.csv"), &table.to_csv()?)?;
    put(format!("{stem}.json"), &serde_json::to_string_pretty(sidecar)?)?;
    for a in artifacts {
        put(a.name.clone(), &a.contents)?;
    }
    Ok(written)
}
