//! Experiment plans as data, the append-only run ledger, improvement
//! arithmetic, table rendering, and paired non-parametric tests.

mod ledger;
mod report;
mod stats;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricKey;

pub use ledger::{read_ledger, record_run, LedgerError, RunResult, LEDGER_SCHEMA_VERSION};
pub use report::{
    format_metric, format_percent, improvement_report, render_tables, Improvement,
    ImprovementReport, MissingCell, RenderedTables, ReportError, ResultTable, TableLayout,
    DEFAULT_TEST_SET,
};
pub use stats::{
    compare_runs, sign_test, wilcoxon_exact_upper, wilcoxon_null_counts, wilcoxon_signed_rank,
    Alternative, StatsError, TestKind, TestResult, WILCOXON_EXACT_MAX_N,
};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan has no varied factors")]
    NoVariedFactors,
    #[error("factor {0:?} has no levels")]
    EmptyFactor(String),
    #[error("factor {factor:?} repeats level {level:?}")]
    DuplicateLevel { factor: String, level: String },
    #[error("factor {0:?} declared twice")]
    DuplicateFactor(String),
    #[error("n_folds must be >= 1")]
    NoFolds,
    #[error("no measured metrics")]
    NoMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Screening,
    Optimization,
    CauseAndEffect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    #[default]
    FullFactorial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    MeanComparison,
    NonparametricTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariedFactor {
    pub name: String,
    pub levels: Vec<String>,
}

impl VariedFactor {
    pub fn new(name: impl Into<String>, levels: &[&str]) -> Self {
        Self {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub objective_kind: ObjectiveKind,
    pub measured_metrics: Vec<MetricKey>,
    #[serde(default)]
    pub fixed_factors: BTreeMap<String, serde_json::Value>,
    /// Declared order is significant: the first factor varies slowest.
    pub varied_factors: Vec<VariedFactor>,
    #[serde(default)]
    pub design: Design,
    pub n_folds: usize,
    pub analysis: Analysis,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.varied_factors.is_empty() {
            return Err(PlanError::NoVariedFactors);
        }
        if self.measured_metrics.is_empty() {
            return Err(PlanError::NoMetrics);
        }
        if self.n_folds == 0 {
            return Err(PlanError::NoFolds);
        }
        let mut names = BTreeSet::new();
        for f in &self.varied_factors {
            if !names.insert(f.name.as_str()) {
                return Err(PlanError::DuplicateFactor(f.name.clone()));
            }
            if f.levels.is_empty() {
                return Err(PlanError::EmptyFactor(f.name.clone()));
            }
            let mut seen = BTreeSet::new();
            if let Some(l) = f.levels.iter().find(|l| !seen.insert(l.as_str())) {
                return Err(PlanError::DuplicateLevel {
                    factor: f.name.clone(),
                    level: l.clone(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDescriptor {
    /// `factor=level` pairs joined by `,` in declared factor order.
    pub run_id: String,
    pub factor_levels: BTreeMap<String, String>,
    pub fold_index: usize,
}

/// Full factorial expansion: factors in declared order (first slowest),
/// folds innermost.
pub fn expand_design(plan: &ExperimentPlan) -> Result<Vec<RunDescriptor>, PlanError> {
    plan.validate()?;
    let dims: Vec<usize> = plan.varied_factors.iter().map(|f| f.levels.len()).collect();
    let cells: usize = dims.iter().product();
    let mut out = Vec::with_capacity(cells * plan.n_folds);
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..cells {
        let pairs: Vec<(&str, &str)> = plan
            .varied_factors
            .iter()
            .zip(&idx)
            .map(|(f, &i)| (f.name.as_str(), f.levels[i].as_str()))
            .collect();
        let run_id = pairs
            .iter()
            .map(|(n, l)| format!("{n}={l}"))
            .collect::<Vec<_>>()
            .join(",");
        let factor_levels: BTreeMap<String, String> = pairs
            .iter()
            .map(|(n, l)| (n.to_string(), l.to_string()))
            .collect();
        for fold_index in 0..plan.n_folds {
            out.push(RunDescriptor {
                run_id: run_id.clone(),
                factor_levels: factor_levels.clone(),
                fold_index,
            });
        }
        for d in (0..dims.len()).rev() {
            idx[d] += 1;
            if idx[d] < dims[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(out)
}
