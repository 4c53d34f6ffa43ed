use augforge::scene_io::{write_scene, write_segmap_png};
use augforge::search::{ParamDim, ParamSpace};
use augforge::synthetic::{
    ground_truth, noisy_predictions, perfect_predictions, separable_clusters, street_fixture,
};
use serde_json::json;

use super::{create_dir, par_map, write_json, write_jsonl, CmdResult, Ctx};
use crate::cli::FixtureArgs;
use crate::error::CliError;
use crate::output::Output;

/// Layout: `scenes/` (image, depth, segmap, boxes per scene), `gts.jsonl`,
/// `preds_perfect.jsonl`, `preds_noisy.jsonl`, `seg_preds/`, `fog_space.json`,
/// `rain_space.json`, and `emb/{clear,odd}.emb`.
pub fn fixture(ctx: &Ctx, args: &FixtureArgs) -> CmdResult {
    if args.n == 0 {
        return Err(CliError::flag("n", "must be at least 1"));
    }
    if args.width < 16 || args.height < 16 {
        return Err(CliError::invalid(
            "--width/--height: must be at least 16 pixels",
        ));
    }
    if !(args.jitter.is_finite() && args.jitter >= 0.0) {
        return Err(CliError::flag("jitter", "must be a finite value >= 0"));
    }
    let out = ctx.out_or(&args.out);
    let scenes = street_fixture(args.n, args.width, args.height, ctx.seed);
    let scene_dir = out.join("scenes");
    let seg_dir = out.join("seg_preds");
    create_dir(&scene_dir)?;
    create_dir(&seg_dir)?;
    par_map(&scenes, |_, s| {
        write_scene(s, &scene_dir)?;
        let seg = s.segmap.as_ref().expect("fixture scenes carry segmaps");
        write_segmap_png(&seg_dir.join(format!("{}.png", s.id)), seg)?;
        Ok(())
    })?;
    write_jsonl(&out.join("gts.jsonl"), &ground_truth(&scenes))?;
    write_jsonl(
        &out.join("preds_perfect.jsonl"),
        &perfect_predictions(&scenes),
    )?;
    write_jsonl(
        &out.join("preds_noisy.jsonl"),
        &noisy_predictions(&scenes, args.jitter, ctx.seed),
    )?;
    let fog = ParamSpace::new(vec![
        ParamDim::continuous("beta", 0.005, 0.08),
        ParamDim::continuous("airlight", 0.6, 0.95),
    ])?;
    let rain = ParamSpace::new(vec![
        ParamDim::log_continuous("streak_density", 100.0, 3000.0),
        ParamDim::discrete("streak_length_px", vec![8.0, 14.0, 20.0]),
        ParamDim::continuous("wetness", 0.1, 0.6),
    ])?;
    write_json(&out.join("fog_space.json"), &fog)?;
    write_json(&out.join("rain_space.json"), &rain)?;
    let (clear, odd) = separable_clusters(50, ctx.seed);
    let emb = out.join("emb");
    create_dir(&emb)?;
    for (name, set) in [("clear.emb", &clear), ("odd.emb", &odd)] {
        let p = emb.join(name);
        set.write(&p)
            .map_err(|e| CliError::from(e).context(p.display()))?;
    }
    let boxes: usize = scenes
        .iter()
        .map(|s| s.annotations.as_ref().map_or(0, Vec::len))
        .sum();
    Ok(Output::new(
        json!({ "scenes": scenes.len(), "boxes": boxes, "out_dir": out }),
        format!(
            "wrote {} scenes ({} boxes) with predictions and spaces into {}\n",
            scenes.len(),
            boxes,
            out.display()
        ),
    ))
}
