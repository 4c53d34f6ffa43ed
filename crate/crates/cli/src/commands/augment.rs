use std::path::Path;

use augforge::augment::{apply_spec, generate_k_unique, AugmentationSpec};
use augforge::rng::derive_seed;
use augforge::scene_io::{write_scene, ConditionTag};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    create_dir, load_scene_dir, par_map, read_jsonl, read_space, write_jsonl, CmdResult, Ctx,
};
use crate::cli::{AugmentArgs, GenerateArgs};
use crate::error::{CliError, CliResult};
use crate::output::Output;

/// File listing what was rendered, one JSON object per output scene.
pub const SPECS_FILE: &str = "specs.jsonl";

/// One line of a generate-k `specs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedEntry {
    pub entry_id: String,
    pub parent_id: String,
    pub parent_tag: ConditionTag,
    pub condition_tag: ConditionTag,
    pub spec: AugmentationSpec,
}

pub fn read_generated(dir: &Path) -> CliResult<Vec<GeneratedEntry>> {
    read_jsonl(&dir.join(SPECS_FILE))
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Every scene gets the spec with seed `derive_seed(spec seed, scene index)`,
/// scenes indexed in sorted id order.
pub fn augment(ctx: &Ctx, args: &AugmentArgs) -> CmdResult {
    let flag = args.kernel.flag_params()?;
    let out = ctx.out_or(&args.out);
    let spec = args.kernel.resolve(flag, ctx.seed)?;
    let scenes = load_scene_dir(&args.input)?;
    create_dir(&out)?;
    if same_dir(&out, &args.input) {
        return Err(CliError::flag("out", "must differ from --in"));
    }
    let rendered = par_map(&scenes, |i, s| {
        let spec = AugmentationSpec {
            seed: derive_seed(spec.seed, i as u64),
            ..spec.clone()
        };
        let aug = apply_spec(s, &spec)
            .map_err(|e| CliError::from(e).context(format!("scene {}", s.id)))?;
        let files = write_scene(&aug, &out)?;
        Ok((json!({ "id": s.id, "spec": spec }), files))
    })?;
    let (rows, files): (Vec<_>, Vec<_>) = rendered.into_iter().unzip();
    write_jsonl(&out.join(SPECS_FILE), &rows)?;
    let n_files: usize = files.iter().map(Vec::len).sum();
    Ok(Output::new(
        json!({
            "kernel": spec.kernel(),
            "scenes": scenes.len(),
            "files_written": n_files,
            "out_dir": out,
        }),
        format!(
            "augmented {} scenes with {} into {}\n",
            scenes.len(),
            spec.kernel(),
            out.display()
        ),
    ))
}

/// Scene `i` draws its k specs with seed `derive_seed(--seed, i)`.
pub fn generate_k(ctx: &Ctx, args: &GenerateArgs) -> CmdResult {
    if args.k == 0 {
        return Err(CliError::flag("k", "must be at least 1"));
    }
    let flag = args.kernel.flag_params()?;
    let out = ctx.out_or(&args.out);
    let base = args.kernel.resolve(flag, ctx.seed)?.params;
    let space = read_space(&args.space)?;
    let scenes = load_scene_dir(&args.input)?;
    create_dir(&out)?;
    if same_dir(&out, &args.input) {
        return Err(CliError::flag("out", "must differ from --in"));
    }
    let per_scene = par_map(&scenes, |i, s| {
        let outs = generate_k_unique(s, &base, &space, args.k, derive_seed(ctx.seed, i as u64))
            .map_err(|e| CliError::from(e).context(format!("scene {}", s.id)))?;
        let mut rows = Vec::with_capacity(outs.len());
        for (spec, aug) in outs {
            write_scene(&aug, &out)?;
            rows.push(GeneratedEntry {
                entry_id: aug.id.clone(),
                parent_id: s.id.clone(),
                parent_tag: s.condition_tag,
                condition_tag: aug.condition_tag,
                spec,
            });
        }
        Ok(rows)
    })?;
    let rows: Vec<GeneratedEntry> = per_scene.into_iter().flatten().collect();
    write_jsonl(&out.join(SPECS_FILE), &rows)?;
    Ok(Output::new(
        json!({
            "kernel": base.name(),
            "scenes": scenes.len(),
            "k": args.k,
            "augmentations": rows.len(),
            "out_dir": out,
        }),
        format!(
            "rendered {} augmentations ({} per scene, {}) into {}\n",
            rows.len(),
            args.k,
            base.name(),
            out.display()
        ),
    ))
}
