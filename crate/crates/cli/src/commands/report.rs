use std::collections::BTreeMap;
use std::path::Path;

use augforge::experiment::{
    compare_runs, read_ledger, render_tables, Alternative, RunResult, TableLayout, TestKind,
};
use serde_json::json;

use super::{write_text, CmdResult, Ctx};
use crate::cli::{AlternativeName, CompareArgs, ReportArgs, TestName};
use crate::error::{CliError, CliResult};
use crate::output::Output;

/// Reading needs an existing file; only appending treats a missing ledger as empty.
fn load(path: &Path) -> CliResult<Vec<RunResult>> {
    if !path.is_file() {
        return Err(CliError::io(
            path,
            std::io::Error::from(std::io::ErrorKind::NotFound),
        ));
    }
    let records = read_ledger(path).map_err(|e| CliError::from(e).context(path.display()))?;
    if records.is_empty() {
        return Err(CliError::invalid(format!(
            "{}: ledger has no runs",
            path.display()
        )));
    }
    Ok(records)
}

pub fn report(ctx: &Ctx, args: &ReportArgs) -> CmdResult {
    let layout = TableLayout {
        variant_factor: args.variant_factor.clone(),
        metrics: (!args.metrics.is_empty()).then(|| args.metrics.clone()),
        variants: (!args.variants.is_empty()).then(|| args.variants.clone()),
        baseline: args.baseline.clone(),
    };
    let records = load(&args.ledger)?;
    let rendered = render_tables(&records, &layout);
    if let Some(b) = &args.baseline {
        if !rendered.tables.iter().any(|t| t.variants.contains(b)) {
            return Err(CliError::flag(
                "baseline",
                format!("no column named {b:?} in {}", args.ledger.display()),
            ));
        }
    }
    let text = rendered.to_text();
    let csv = rendered.to_csv();
    if args.write {
        write_text(&ctx.out_dir.join("tables.txt"), &text)?;
        write_text(&ctx.out_dir.join("tables.csv"), &csv)?;
    }
    Ok(Output::new(
        serde_json::to_value(&rendered).expect("tables serialize"),
        text,
    )
    .with_csv(csv))
}

pub fn compare(_ctx: &Ctx, args: &CompareArgs) -> CmdResult {
    if args.a == args.b {
        return Err(CliError::flag("b", "must name a different run than --a"));
    }
    let records = load(&args.ledger)?;
    let pick = |run: &str| -> BTreeMap<(Option<String>, usize), f64> {
        records
            .iter()
            .filter(|r| r.run_id == run)
            .filter(|r| args.test_set.is_none() || r.test_set == args.test_set)
            .filter_map(|r| {
                Some((
                    (r.test_set.clone(), r.fold_index),
                    r.metrics.get(args.metric)?,
                ))
            })
            .collect()
    };
    let a = pick(&args.a);
    let b = pick(&args.b);
    for (flag, run, m) in [("a", &args.a, &a), ("b", &args.b, &b)] {
        if m.is_empty() {
            return Err(CliError::flag(
                flag,
                format!("run {run:?} has no {} values in the ledger", args.metric),
            ));
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        a.iter().filter_map(|(k, x)| Some((*x, *b.get(k)?))).unzip();
    let test = match args.test {
        TestName::Wilcoxon => TestKind::Wilcoxon,
        TestName::Sign => TestKind::Sign,
    };
    let alt = match args.alternative {
        AlternativeName::Greater => Alternative::Greater,
        AlternativeName::Less => Alternative::Less,
        AlternativeName::TwoSided => Alternative::TwoSided,
    };
    let r = compare_runs(&xs, &ys, test, alt)?;
    let text = format!(
        "{:?} test on {} ({} paired folds, {} ties dropped)\nstatistic {}  p = {:.6}{}\n",
        r.test,
        args.metric.label(),
        xs.len(),
        r.zeros_dropped,
        r.statistic,
        r.p_value,
        if r.exact {
            " (exact)"
        } else {
            " (normal approximation)"
        }
    );
    Ok(Output::new(
        json!({ "a": args.a, "b": args.b, "metric": args.metric, "pairs": xs.len(), "result": r }),
        text,
    ))
}
