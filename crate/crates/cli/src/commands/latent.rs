use augforge::latent::{
    odd_score, train_classifier_traced, EmbeddingSet, LinearClassifier, TrainConfig,
};
use serde_json::json;

use super::{create_parent, CmdResult, Ctx};
use crate::cli::{LatentScoreArgs, LatentTrainArgs};
use crate::error::CliError;
use crate::output::Output;

fn read_set(path: &std::path::Path) -> Result<EmbeddingSet, CliError> {
    EmbeddingSet::read(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn train(ctx: &Ctx, args: &LatentTrainArgs) -> CmdResult {
    if !(args.learning_rate.is_finite() && args.learning_rate > 0.0) {
        return Err(CliError::flag(
            "learning-rate",
            "must be a finite value > 0",
        ));
    }
    if !(args.l2.is_finite() && args.l2 >= 0.0) {
        return Err(CliError::flag("l2", "must be a finite value >= 0"));
    }
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(CliError::flag("tol", "must be a finite value >= 0"));
    }
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        max_iters: args.max_iters,
        l2: args.l2,
        tol: args.tol,
        seed: ctx.seed,
    };
    let out = ctx.file_or(&args.out, "classifier.json");
    let clear = read_set(&args.clear)?;
    let odd = read_set(&args.odd)?;
    let (clf, trace) = train_classifier_traced::<f64>(&clear, &odd, &config)?;
    let right = clear.rows().filter(|r| clf.probability(r) < 0.5).count()
        + odd.rows().filter(|r| clf.probability(r) > 0.5).count();
    let accuracy = right as f64 / (clear.len() + odd.len()) as f64;
    create_parent(&out)?;
    clf.write(&out)
        .map_err(|e| CliError::from(e).context(out.display()))?;
    Ok(Output::new(
        json!({
            "iterations": clf.training_meta.iterations,
            "initial_loss": trace[0],
            "final_loss": clf.training_meta.final_loss,
            "train_accuracy": accuracy,
            "classifier": out,
        }),
        format!(
            "trained on {} clear + {} adverse rows: {} iterations, loss {:.6}, accuracy {:.4}\nwrote {}\n",
            clear.len(),
            odd.len(),
            clf.training_meta.iterations,
            clf.training_meta.final_loss,
            accuracy,
            out.display()
        ),
    ))
}

pub fn score(_ctx: &Ctx, args: &LatentScoreArgs) -> CmdResult {
    let clf = LinearClassifier::<f64>::read(&args.classifier)
        .map_err(|e| CliError::from(e).context(args.classifier.display()))?;
    let mut rows = Vec::with_capacity(args.embeddings.len());
    let mut text = String::new();
    let mut csv = String::from("file,rows,odd_score\n");
    for path in &args.embeddings {
        let set = read_set(path)?;
        let s = odd_score(&clf, &set).map_err(|e| CliError::from(e).context(path.display()))?;
        text.push_str(&format!("{:.6}  {}\n", s, path.display()));
        csv.push_str(&format!("{},{},{}\n", path.display(), set.len(), s));
        rows.push(json!({ "file": path, "rows": set.len(), "odd_score": s }));
    }
    Ok(Output::new(json!({ "scores": rows }), text).with_csv(csv))
}
