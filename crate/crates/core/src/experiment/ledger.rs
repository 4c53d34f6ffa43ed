use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricSet;

pub const LEDGER_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("run {run_id:?} fold {fold_index}{} is already recorded", test_set.as_ref().map(|t| format!(" on {t}")).unwrap_or_default())]
    DuplicateRun {
        run_id: String,
        fold_index: usize,
        test_set: Option<String>,
    },
    #[error("{path}:{line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("invalid run result: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// One evaluated run: a factor-level combination, a fold and the test set
/// it was scored on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub run_id: String,
    #[serde(default)]
    pub factor_levels: BTreeMap<String, String>,
    #[serde(default)]
    pub fold_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_set: Option<String>,
    pub metrics: MetricSet<f64>,
    #[serde(default)]
    pub timestamp: String,
}

impl RunResult {
    pub fn new(run_id: impl Into<String>, metrics: MetricSet<f64>) -> Self {
        Self {
            schema_version: LEDGER_SCHEMA_VERSION,
            run_id: run_id.into(),
            factor_levels: BTreeMap::new(),
            fold_index: 0,
            test_set: None,
            metrics,
            timestamp: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        if self.schema_version != LEDGER_SCHEMA_VERSION {
            return Err(LedgerError::Invalid(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.run_id.is_empty() {
            return Err(LedgerError::Invalid("empty run_id".into()));
        }
        if self.metrics.is_empty() {
            return Err(LedgerError::Invalid(format!(
                "run {:?} has no metrics",
                self.run_id
            )));
        }
        for (k, v) in self.metrics.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(LedgerError::Invalid(format!(
                    "{} = {v} outside [0, 1]",
                    k.as_str()
                )));
            }
        }
        Ok(())
    }

    fn same_slot(&self, other: &Self) -> bool {
        self.run_id == other.run_id
            && self.fold_index == other.fold_index
            && self.test_set == other.test_set
    }
}

/// All records in append order. A missing file is an empty ledger; blank
/// lines are skipped.
pub fn read_ledger(path: &Path) -> Result<Vec<RunResult>, LedgerError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(LedgerError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| LedgerError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let r: RunResult = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
        r.validate().map_err(|e| corrupt(e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}

/// Appends `result` as one JSON line. Rejects a second record for the same
/// run id, fold and test set.
pub fn record_run(path: &Path, result: &RunResult) -> Result<(), LedgerError> {
    result.validate()?;
    if let Some(prev) = read_ledger(path)?.iter().find(|r| r.same_slot(result)) {
        return Err(LedgerError::DuplicateRun {
            run_id: prev.run_id.clone(),
            fold_index: prev.fold_index,
            test_set: prev.test_set.clone(),
        });
    }
    let mut line = serde_json::to_string(result).expect("run result serializes");
    line.push('\n');
    let io = |source| LedgerError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io)?;
    f.write_all(line.as_bytes()).map_err(io)
}
