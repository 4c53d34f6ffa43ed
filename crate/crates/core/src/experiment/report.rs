//! Percent-change reports and result tables (one per test set, metrics as
//! rows, variants as columns).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ledger::RunResult;
use crate::metrics::{Direction, MetricKey, MetricSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("metric {} present in only one of the two reports", .0.as_str())]
    KeyMismatch(MetricKey),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement<T = f64> {
    pub metric: MetricKey,
    pub baseline: T,
    pub variant: T,
    /// `100 * (variant - baseline) / baseline`; `None` when the baseline is 0.
    pub percent: Option<T>,
    pub higher_is_better: bool,
    /// Whether the variant moved in the metric's better direction; `None`
    /// when it did not move.
    pub improved: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport<T = f64> {
    pub rows: Vec<Improvement<T>>,
}

impl<T: Scalar> ImprovementReport<T> {
    pub fn get(&self, key: MetricKey) -> Option<&Improvement<T>> {
        self.rows.iter().find(|r| r.metric == key)
    }

    pub fn to_text(&self) -> String {
        let header = vec![
            "metric".to_string(),
            "baseline".into(),
            "variant".into(),
            "change [%]".into(),
        ];
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    format!("{} {}", r.metric.label(), r.metric.direction().arrow()),
                    format_metric(r.baseline.to_f64_lossy()),
                    format_metric(r.variant.to_f64_lossy()),
                    format_percent(r.percent.map(|p| p.to_f64_lossy()), true),
                ]
            })
            .collect();
        align(header, rows)
    }
}

/// Signed percent change of every metric, in the canonical metric order.
pub fn improvement_report<T: Scalar>(
    baseline: &MetricSet<T>,
    variant: &MetricSet<T>,
) -> Result<ImprovementReport<T>, ReportError> {
    for k in MetricKey::ALL {
        if baseline.get(k).is_some() != variant.get(k).is_some() {
            return Err(ReportError::KeyMismatch(k));
        }
    }
    let rows = MetricKey::ALL
        .into_iter()
        .filter_map(|k| Some((k, baseline.get(k)?, variant.get(k)?)))
        .map(|(metric, b, v)| {
            let percent = (b != T::zero()).then(|| T::of(100.0) * (v - b) / b);
            let higher = metric.direction() == Direction::HigherIsBetter;
            let improved = (v != b).then(|| (v > b) == higher);
            Improvement {
                metric,
                baseline: b,
                variant: v,
                percent,
                higher_is_better: higher,
                improved,
            }
        })
        .collect();
    Ok(ImprovementReport { rows })
}

/// Two-decimal signed percent. `unicode_minus` selects U+2212 for negative
/// values (text tables) over ASCII `-` (CSV and machine output).
pub fn format_percent(p: Option<f64>, unicode_minus: bool) -> String {
    match p {
        None => "undefined baseline".into(),
        Some(p) => {
            let s = format!("{:.2}", p.abs());
            if s.bytes().all(|c| c == b'0' || c == b'.') {
                format!("+{s}")
            } else if p < 0.0 {
                format!("{}{s}", if unicode_minus { '\u{2212}' } else { '-' })
            } else {
                format!("+{s}")
            }
        }
    }
}

/// Four decimals with trailing zeros trimmed down to three.
pub fn format_metric(v: f64) -> String {
    let mut s = format!("{v:.4}");
    if s.ends_with('0') {
        s.pop();
    }
    s
}

fn align(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let ncol = header.len();
    let width: Vec<usize> = (0..ncol)
        .map(|c| {
            std::iter::once(&header)
                .chain(&rows)
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let line: Vec<String> = row
            .iter()
            .zip(&width)
            .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// How ledger records map onto table columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableLayout {
    /// Factor whose level names the column; the run id when unset or absent.
    pub variant_factor: Option<String>,
    /// Row order; defaults to every metric present, in canonical order.
    pub metrics: Option<Vec<MetricKey>>,
    /// Column order; defaults to first appearance in the ledger.
    pub variants: Option<Vec<String>>,
    /// Column the improvement rows compare against; defaults to the first.
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCell {
    pub test_set: String,
    pub variant: String,
    pub metric: MetricKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub test_set: String,
    pub variants: Vec<String>,
    pub metrics: Vec<MetricKey>,
    /// `means[metric][variant]`, mean over every matching record.
    pub means: Vec<Vec<Option<f64>>>,
    /// Number of records averaged into each cell.
    pub counts: Vec<Vec<usize>>,
    /// Column index of the best value per row.
    pub best: Vec<Option<usize>>,
    pub baseline: String,
    /// Percent change of each column against the baseline column.
    pub improvement: Vec<Vec<Option<f64>>>,
}

impl ResultTable {
    pub fn aggregation_label(&self) -> String {
        let counts: Vec<usize> = self
            .counts
            .iter()
            .flatten()
            .copied()
            .filter(|c| *c > 0)
            .collect();
        let lo = counts.iter().min().copied().unwrap_or(0);
        let hi = counts.iter().max().copied().unwrap_or(0);
        match (lo, hi) {
            (1, 1) => "single run per cell".into(),
            (a, b) if a == b => format!("mean over {a} folds"),
            (a, b) => format!("mean over {a}-{b} folds"),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "test set: {} ({})\n",
            self.test_set,
            self.aggregation_label()
        );
        let mut header = vec!["metric".to_string()];
        header.extend(self.variants.iter().cloned());
        let rows = self
            .metrics
            .iter()
            .enumerate()
            .map(|(m, key)| {
                let mut row = vec![format!("{} {}", key.label(), key.direction().arrow())];
                row.extend(
                    self.means[m]
                        .iter()
                        .enumerate()
                        .map(|(v, cell)| match cell {
                            None => "n/a".to_string(),
                            Some(x) if self.best[m] == Some(v) => {
                                format!("**{}**", format_metric(*x))
                            }
                            Some(x) => format_metric(*x),
                        }),
                );
                row
            })
            .collect();
        out.push_str(&align(header, rows));
        if self.variants.len() > 1 {
            let _ = writeln!(out, "\nimprovement over {} [%]", self.baseline);
            let cols: Vec<usize> = (0..self.variants.len())
                .filter(|&v| self.variants[v] != self.baseline)
                .collect();
            let mut header = vec!["metric".to_string()];
            header.extend(cols.iter().map(|&v| self.variants[v].clone()));
            let rows = self
                .metrics
                .iter()
                .enumerate()
                .map(|(m, key)| {
                    let mut row = vec![format!("{} {}", key.label(), key.direction().arrow())];
                    row.extend(cols.iter().map(|&v| {
                        match (self.means[m][v], self.improvement[m][v]) {
                            (None, _) => "n/a".to_string(),
                            (Some(_), p) => format_percent(p, true),
                        }
                    }));
                    row
                })
                .collect();
            out.push_str(&align(header, rows));
        }
        out
    }

    fn csv_rows(&self, out: &mut String) {
        for (m, key) in self.metrics.iter().enumerate() {
            let _ = write!(out, "{},{}", csv_field(&self.test_set), key.as_str());
            for cell in &self.means[m] {
                match cell {
                    Some(x) => {
                        let _ = write!(out, ",{x}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedTables {
    pub tables: Vec<ResultTable>,
    pub missing: Vec<MissingCell>,
}

impl RenderedTables {
    pub fn to_text(&self) -> String {
        let mut out = self
            .tables
            .iter()
            .map(ResultTable::to_text)
            .collect::<Vec<_>>()
            .join("\n");
        if !self.missing.is_empty() {
            out.push_str("\nmissing cells:\n");
            for m in &self.missing {
                let _ = writeln!(
                    out,
                    "  {} / {} / {}",
                    m.test_set,
                    m.variant,
                    m.metric.label()
                );
            }
        }
        out
    }

    /// One CSV block per table: `test_set,metric,<variants...>` with raw means.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            out.push_str("test_set,metric");
            for v in &t.variants {
                out.push(',');
                out.push_str(&csv_field(v));
            }
            out.push('\n');
            t.csv_rows(&mut out);
        }
        out
    }
}

/// Label of the untagged test set.
pub const DEFAULT_TEST_SET: &str = "all";

fn first_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

/// Aggregates ledger records into per-test-set tables. Missing cells are
/// reported rather than treated as errors.
pub fn render_tables(records: &[RunResult], layout: &TableLayout) -> RenderedTables {
    let variant_of = |r: &RunResult| -> String {
        layout
            .variant_factor
            .as_ref()
            .and_then(|f| r.factor_levels.get(f).cloned())
            .unwrap_or_else(|| r.run_id.clone())
    };
    let test_of = |r: &RunResult| {
        r.test_set
            .clone()
            .unwrap_or_else(|| DEFAULT_TEST_SET.into())
    };
    let labels: Vec<String> = records.iter().map(test_of).collect();
    let test_sets = first_appearance(labels.iter().map(String::as_str));
    let mut tables = Vec::new();
    let mut missing = Vec::new();
    for ts in test_sets {
        let recs: Vec<&RunResult> = records.iter().filter(|r| test_of(r) == ts).collect();
        let variants = match &layout.variants {
            Some(v) => v.clone(),
            None => {
                let names: Vec<String> = recs.iter().map(|r| variant_of(r)).collect();
                first_appearance(names.iter().map(String::as_str))
            }
        };
        let metrics: Vec<MetricKey> = match &layout.metrics {
            Some(m) => m.clone(),
            None => MetricKey::ALL
                .into_iter()
                .filter(|k| recs.iter().any(|r| r.metrics.get(*k).is_some()))
                .collect(),
        };
        let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for r in &recs {
            let Some(v) = variants.iter().position(|x| *x == variant_of(r)) else {
                continue;
            };
            for (m, key) in metrics.iter().enumerate() {
                if let Some(x) = r.metrics.get(*key) {
                    let e = sums.entry((m, v)).or_insert((0.0, 0));
                    e.0 += x;
                    e.1 += 1;
                }
            }
        }
        let means: Vec<Vec<Option<f64>>> = (0..metrics.len())
            .map(|m| {
                (0..variants.len())
                    .map(|v| sums.get(&(m, v)).map(|(s, n)| s / *n as f64))
                    .collect()
            })
            .collect();
        let counts: Vec<Vec<usize>> = (0..metrics.len())
            .map(|m| {
                (0..variants.len())
                    .map(|v| sums.get(&(m, v)).map_or(0, |e| e.1))
                    .collect()
            })
            .collect();
        for (m, key) in metrics.iter().enumerate() {
            for (v, name) in variants.iter().enumerate() {
                if means[m][v].is_none() {
                    missing.push(MissingCell {
                        test_set: ts.clone(),
                        variant: name.clone(),
                        metric: *key,
                    });
                }
            }
        }
        let best = metrics
            .iter()
            .enumerate()
            .map(|(m, key)| {
                let higher = key.direction() == Direction::HigherIsBetter;
                let mut best: Option<(usize, f64)> = None;
                for (v, cell) in means[m].iter().enumerate() {
                    if let Some(x) = *cell {
                        let better = match best {
                            None => true,
                            Some((_, b)) => (higher && x > b) || (!higher && x < b),
                        };
                        if better {
                            best = Some((v, x));
                        }
                    }
                }
                best.map(|(v, _)| v)
            })
            .collect();
        let baseline = layout
            .baseline
            .clone()
            .filter(|b| variants.contains(b))
            .or_else(|| variants.first().cloned())
            .unwrap_or_default();
        let bi = variants.iter().position(|v| *v == baseline);
        let improvement = means
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(v, cell)| {
                        let b = row[bi?]?;
                        let x = (*cell)?;
                        (Some(v) != bi && b != 0.0).then(|| 100.0 * (x - b) / b)
                    })
                    .collect()
            })
            .collect();
        tables.push(ResultTable {
            test_set: ts,
            variants,
            metrics,
            means,
            counts,
            best,
            baseline,
            improvement,
        });
    }
    RenderedTables { tables, missing }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[(MetricKey, f64)]) -> MetricSet<f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn headline_percentages() {
        let r = improvement_report(
            &set(&[(MetricKey::Map, 0.245)]),
            &set(&[(MetricKey::Map, 0.263)]),
        )
        .unwrap();
        let p = r.get(MetricKey::Map).unwrap().percent.unwrap();
        assert!((p - 7.3469).abs() < 1e-3);
        assert_eq!(format_percent(Some(p), false), "+7.35");
        let r = improvement_report(
            &set(&[(MetricKey::Miou, 0.7275)]),
            &set(&[(MetricKey::Miou, 0.6480)]),
        )
        .unwrap();
        let p = r.get(MetricKey::Miou).unwrap().percent;
        assert_eq!(format_percent(p, true), "\u{2212}10.93");
        assert_eq!(format_percent(p, false), "-10.93");
        assert_eq!(r.rows[0].improved, Some(false));
    }

    #[test]
    fn self_comparison_is_zero() {
        let s = set(&[
            (MetricKey::Map, 0.3),
            (MetricKey::Vr, 0.4),
            (MetricKey::Miou, 0.0),
        ]);
        let r = improvement_report(&s, &s).unwrap();
        assert_eq!(r.get(MetricKey::Map).unwrap().percent, Some(0.0));
        assert_eq!(r.get(MetricKey::Miou).unwrap().percent, None);
        assert_eq!(format_percent(None, true), "undefined baseline");
        assert_eq!(format_percent(Some(-0.001), true), "+0.00");
    }

    #[test]
    fn mismatched_keys() {
        assert_eq!(
            improvement_report(
                &set(&[(MetricKey::Map, 0.3)]),
                &set(&[(MetricKey::Fr, 0.3)])
            )
            .unwrap_err(),
            ReportError::KeyMismatch(MetricKey::Map)
        );
    }

    #[test]
    fn lower_is_better_bolding() {
        let recs = vec![
            RunResult::new("baseline", set(&[(MetricKey::Fr, 0.359)])),
            RunResult::new("batched", set(&[(MetricKey::Fr, 0.325)])),
        ];
        let t = render_tables(&recs, &TableLayout::default());
        let text = t.to_text();
        assert!(text.contains("**0.325**"), "{text}");
        assert!(!text.contains("**0.359**"));
        assert_eq!(t.tables[0].best, vec![Some(1)]);
    }

    #[test]
    fn single_cell_and_fold_means() {
        let t = render_tables(
            &[RunResult::new("only", set(&[(MetricKey::Map, 0.5)]))],
            &TableLayout::default(),
        );
        assert_eq!(t.tables[0].means, vec![vec![Some(0.5)]]);
        assert_eq!(t.tables[0].aggregation_label(), "single run per cell");

        let mut a = RunResult::new("v", set(&[(MetricKey::Map, 0.2)]));
        let mut b = a.clone();
        b.fold_index = 1;
        b.metrics = set(&[(MetricKey::Map, 0.4)]);
        a.fold_index = 0;
        let t = render_tables(&[a, b], &TableLayout::default());
        assert!((t.tables[0].means[0][0].unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(t.tables[0].aggregation_label(), "mean over 2 folds");
    }

    #[test]
    fn missing_cells_are_reported() {
        let recs = vec![
            RunResult::new("a", set(&[(MetricKey::Map, 0.2), (MetricKey::Vr, 0.5)])),
            RunResult::new("b", set(&[(MetricKey::Map, 0.3)])),
        ];
        let t = render_tables(&recs, &TableLayout::default());
        assert_eq!(
            t.missing,
            vec![MissingCell {
                test_set: "all".into(),
                variant: "b".into(),
                metric: MetricKey::Vr
            }]
        );
        assert!(t.to_csv().contains("all,vr,0.5,\n"));
    }

    #[test]
    fn metric_formatting() {
        assert_eq!(format_metric(0.245), "0.245");
        assert_eq!(format_metric(0.7275), "0.7275");
        assert_eq!(format_metric(1.0), "1.000");
    }
}
