use std::convert::Infallible;

use augforge::latent::{odd_score, DirLoader, EmbeddingLoader, LinearClassifier};
use augforge::metrics::MetricSet;
use augforge::search::{
    grid_search, improvement_objective, random_search, ParamSpace, ParamVector, SearchError,
    SearchTrace,
};
use serde_json::json;

use super::{par_map, read_json, read_space, write_json, CmdResult, Ctx};
use crate::cli::{ObjectiveMode, SearchArgs, SearchMethod};
use crate::error::{CliError, CliResult};
use crate::output::Output;

pub const TRACE_FILE: &str = "search_trace.json";

/// Runs the search with `objective`, so that the points and their order
/// match exactly what the library search produces.
fn run<F>(
    args: &SearchArgs,
    space: &ParamSpace,
    seed: u64,
    objective: F,
) -> Result<SearchTrace<f64>, SearchError>
where
    F: FnMut(&ParamVector) -> Result<f64, Infallible>,
{
    match args.method {
        SearchMethod::Grid => grid_search(space, args.points_per_dim, args.budget, objective),
        SearchMethod::Random => random_search(space, args.samples, seed, objective),
    }
}

fn check_flags(args: &SearchArgs) -> CliResult<()> {
    match args.method {
        SearchMethod::Grid if args.points_per_dim == 0 => {
            return Err(CliError::flag("points-per-dim", "must be at least 1"))
        }
        SearchMethod::Random if args.samples == 0 => {
            return Err(CliError::flag("samples", "must be at least 1"))
        }
        SearchMethod::Random if args.samples > args.budget => {
            return Err(CliError::flag(
                "samples",
                format!(
                    "{} exceeds the evaluation budget of {}",
                    args.samples, args.budget
                ),
            ))
        }
        _ => {}
    }
    if args.dry_run {
        return Ok(());
    }
    let need = |v: bool, flag: &str, mode: &str| {
        if v {
            Ok(())
        } else {
            Err(CliError::flag(
                flag,
                format!("is required by --objective {mode}"),
            ))
        }
    };
    match args.objective {
        ObjectiveMode::MetricDelta => {
            need(args.baseline.is_some(), "baseline", "metric-delta")?;
            need(args.candidates.is_some(), "candidates", "metric-delta")
        }
        ObjectiveMode::LatentScore => {
            need(args.classifier.is_some(), "classifier", "latent-score")?;
            need(args.embeddings.is_some(), "embeddings", "latent-score")
        }
    }
}

fn evaluate(args: &SearchArgs, points: &[ParamVector]) -> CliResult<Vec<f64>> {
    match args.objective {
        ObjectiveMode::MetricDelta => {
            let base_path = args.baseline.as_ref().expect("checked");
            let dir = args.candidates.as_ref().expect("checked");
            let baseline: MetricSet<f64> = read_json(base_path)?;
            par_map(points, |_, p| {
                let path = dir.join(format!("{}.json", p.key()));
                let cand: MetricSet<f64> = read_json(&path)?;
                improvement_objective(&baseline, &cand, args.metric)
                    .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
            })
        }
        ObjectiveMode::LatentScore => {
            let clf_path = args.classifier.as_ref().expect("checked");
            let clf = LinearClassifier::<f64>::read(clf_path)
                .map_err(|e| CliError::from(e).context(clf_path.display()))?;
            let loader = DirLoader::new(args.embeddings.as_ref().expect("checked"));
            par_map(points, |_, p| {
                let emb = loader
                    .load(p)
                    .map_err(|e| CliError::from(e).context(loader.path_for(p).display()))?;
                odd_score(&clf, &emb)
                    .map_err(|e| CliError::from(e).context(loader.path_for(p).display()))
            })
        }
    }
}

pub fn search(ctx: &Ctx, args: &SearchArgs) -> CmdResult {
    check_flags(args)?;
    let space = read_space(&args.space)?;
    let listing = run(args, &space, ctx.seed, |_| Ok(0.0))?;
    let points: Vec<ParamVector> = listing.evaluations.into_iter().map(|e| e.params).collect();

    if args.dry_run {
        let rows: Vec<_> = points
            .iter()
            .map(|p| json!({ "key": p.key(), "params": p }))
            .collect();
        let mut text = String::new();
        let mut csv = String::from("key,params\n");
        for p in &points {
            text.push_str(&format!("{}  {p}\n", p.key()));
            csv.push_str(&format!("{},\"{p}\"\n", p.key()));
        }
        return Ok(Output::new(json!({ "points": rows }), text).with_csv(csv));
    }

    let values = evaluate(args, &points)?;
    let mut next = values.iter().copied();
    let trace = run(args, &space, ctx.seed, |_| {
        Ok(next.next().expect("one value per point"))
    })?;
    let trace_path = ctx.out_dir.join(TRACE_FILE);
    write_json(&trace_path, &trace)?;

    let best = trace.best();
    let mut text = String::new();
    let mut csv = String::from("index,key,params,objective,best\n");
    for (i, e) in trace.evaluations.iter().enumerate() {
        let mark = if i == trace.best_index { "*" } else { " " };
        text.push_str(&format!(
            "{mark} {:>4}  {}  {:+.6}  {}\n",
            i,
            e.params.key(),
            e.objective,
            e.params
        ));
        csv.push_str(&format!(
            "{i},{},\"{}\",{},{}\n",
            e.params.key(),
            e.params,
            e.objective,
            i == trace.best_index
        ));
    }
    text.push_str(&format!(
        "best: {} (objective {:+.6})\n",
        best.params, best.objective
    ));
    Ok(Output::new(
        json!({
            "best_index": trace.best_index,
            "best_params": best.params,
            "best_key": best.params.key(),
            "best_objective": best.objective,
            "evaluations": trace.len(),
            "trace_file": trace_path,
        }),
        text,
    )
    .with_csv(csv))
}
