use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use augforge::strategy::{
    assign_loss_weights, balanced_validation, build_minibatch_groups, build_ratio_manifest,
    cv_folds_manifest, split_dataset, with_entries, DatasetManifest, Fractions, ManifestEntry,
    Ratio, RatioPlan, Role, SceneRef, Split, MANIFEST_VERSION,
};
use serde_json::json;

use super::augment::read_generated;
use super::{read_space, scene_refs, write_json, CmdResult, Ctx};
use crate::cli::{FoldsArgs, PlanArgs, SplitArgs};
use crate::error::{CliError, CliResult};
use crate::output::Output;

fn read_manifest(path: &Path) -> CliResult<DatasetManifest> {
    DatasetManifest::read(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn summary(m: &DatasetManifest) -> (serde_json::Value, String, String) {
    let mut counts = BTreeMap::new();
    let mut text = String::new();
    let mut csv = String::from("split,real,augmented\n");
    for s in Split::ALL {
        let real = m.count(s, Role::Real);
        let aug = m.count(s, Role::Augmented);
        counts.insert(s.as_str(), json!({ "real": real, "augmented": aug }));
        text.push_str(&format!(
            "{:<5}  real {:>5}  augmented {:>5}\n",
            s.as_str(),
            real,
            aug
        ));
        csv.push_str(&format!("{},{real},{aug}\n", s.as_str()));
    }
    (json!(counts), text, csv)
}

pub fn split(ctx: &Ctx, args: &SplitArgs) -> CmdResult {
    let fractions = Fractions::new(args.train, args.val, args.test);
    fractions
        .validate()
        .map_err(|e| CliError::invalid(format!("--train/--val/--test: {e}")))?;
    let source = args.source.require()?;
    let out = ctx.file_or(&args.out, "split.json");
    let refs = scene_refs(source)?;
    let items: Vec<_> = refs
        .iter()
        .map(|r| (r.id.clone(), r.condition_tag))
        .collect();
    let assignment = split_dataset(&items, fractions, ctx.seed)?;
    let manifest = DatasetManifest::from_split(&refs, &assignment, ctx.seed);
    write_json(&out, &manifest)?;
    let (counts, text, csv) = summary(&manifest);
    Ok(Output::new(
        json!({ "manifest": out, "counts": counts }),
        format!("{text}wrote {}\n", out.display()),
    )
    .with_csv(csv))
}

fn as_ref(e: &ManifestEntry) -> SceneRef {
    SceneRef {
        id: e.entry_id.clone(),
        image_ref: e.image_ref.clone(),
        condition_tag: e.condition_tag,
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Manifest over `train` whose augmentations are the generate-k outputs of
/// train parents. The declared ratio is the realized one in lowest terms.
fn from_generated(
    train: &[SceneRef],
    dir: &Path,
    seed: u64,
) -> CliResult<(DatasetManifest, usize)> {
    let generated = read_generated(dir)?;
    let ids: BTreeSet<&str> = train.iter().map(|s| s.id.as_str()).collect();
    let mut children: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    let mut skipped = 0;
    for g in &generated {
        if ids.contains(g.parent_id.as_str()) {
            children.entry(g.parent_id.as_str()).or_default().push(g);
        } else {
            skipped += 1;
        }
    }
    let mut entries = Vec::new();
    let mut specs = BTreeMap::new();
    for s in train {
        entries.push(ManifestEntry::real(s, Split::Train));
        for g in children.get(s.id.as_str()).into_iter().flatten() {
            entries.push(ManifestEntry {
                entry_id: g.entry_id.clone(),
                image_ref: dir
                    .join(format!("{}.png", g.entry_id))
                    .display()
                    .to_string(),
                role: Role::Augmented,
                parent_id: Some(s.id.clone()),
                spec_ref: Some(g.entry_id.clone()),
                group_id: None,
                loss_weight: 1.0,
                split: Split::Train,
                condition_tag: g.condition_tag,
            });
            specs.insert(g.entry_id.clone(), g.spec.clone());
        }
    }
    let n_aug = specs.len();
    if n_aug == 0 {
        return Err(CliError::flag(
            "generated",
            "no augmentation belongs to a train image",
        ));
    }
    let g = gcd(train.len(), n_aug);
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        ratio: Ratio::new((train.len() / g) as u32, (n_aug / g) as u32),
        k_augs: children.values().map(Vec::len).max().unwrap_or(0),
        alpha: None,
        seed,
        specs,
        entries,
    };
    manifest.validate()?;
    Ok((manifest, skipped))
}

pub fn plan(ctx: &Ctx, args: &PlanArgs) -> CmdResult {
    if args.ratio.is_none() && args.generated.is_none() {
        return Err(CliError::invalid(
            "one of --ratio or --generated is required",
        ));
    }
    let flag_params = if args.ratio.is_some() {
        if args.space.is_none() {
            return Err(CliError::flag("space", "is required with --ratio"));
        }
        args.kernel.flag_params()?
    } else {
        if args.kernel.kernel.is_some() || args.kernel.spec.is_some() || args.space.is_some() {
            return Err(CliError::flag(
                "generated",
                "takes its augmentations from generate-k; drop --kernel/--spec/--space",
            ));
        }
        None
    };
    if let Some(p) = args.flip_prob {
        if args.ratio.is_none() {
            return Err(CliError::flag("flip-prob", "requires --ratio"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::flag("flip-prob", format!("{p} outside [0, 1]")));
        }
    }
    if let Some(a) = args.alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::flag("alpha", format!("{a} outside (0, 1)")));
        }
    }
    let pools = args.val_clear.is_some();
    if pools != (args.val_per_condition > 0) {
        return Err(CliError::flag(
            "val-per-condition",
            "must be > 0 exactly when --val-clear/--val-adverse are given",
        ));
    }
    if args.split.is_none() && args.source.input.is_none() && args.source.scenes.is_none() {
        return Err(CliError::invalid(
            "one of --split, --in or --scenes is required",
        ));
    }
    let out = ctx.file_or(&args.out, "manifest.json");

    let (train, kept): (Vec<SceneRef>, Vec<ManifestEntry>) = match &args.split {
        Some(path) => {
            let m = read_manifest(path)?;
            let (t, k): (Vec<_>, Vec<_>) =
                m.entries.into_iter().partition(|e| e.split == Split::Train);
            (
                t.iter()
                    .filter(|e| e.role == Role::Real)
                    .map(as_ref)
                    .collect(),
                k,
            )
        }
        None => (scene_refs(args.source.require()?)?, Vec::new()),
    };

    let (mut manifest, skipped) = match (&args.ratio, &args.generated) {
        (Some(ratio), _) => {
            let spec = args.kernel.resolve(flag_params, ctx.seed)?;
            let space = read_space(args.space.as_ref().expect("checked"))?;
            let plan = RatioPlan {
                ratio: *ratio,
                kernel: &spec.params,
                space: &space,
                seed: ctx.seed,
                flip_probability: args.flip_prob,
            };
            (
                build_ratio_manifest(&train, &plan)
                    .map_err(|e| CliError::from(e).context("--ratio"))?,
                0,
            )
        }
        (None, Some(dir)) => from_generated(&train, dir, ctx.seed)?,
        (None, None) => unreachable!("checked above"),
    };
    for s in [Split::Val, Split::Test] {
        let refs: Vec<SceneRef> = kept
            .iter()
            .filter(|e| e.split == s && e.role == Role::Real)
            .map(as_ref)
            .collect();
        if !refs.is_empty() {
            manifest = with_entries(manifest, &refs, s)?;
        }
    }
    if args.minibatch {
        let k = manifest.k_augs;
        manifest = build_minibatch_groups(&manifest, k)
            .map_err(|e| CliError::from(e).context("--minibatch"))?;
    }
    if let Some(a) = args.alpha {
        manifest = assign_loss_weights(&manifest, a)?;
    }
    if let (Some(c), Some(a)) = (&args.val_clear, &args.val_adverse) {
        let clear = scene_refs(c)?;
        let adverse = scene_refs(a)?;
        manifest = balanced_validation(
            &manifest,
            &clear,
            &adverse,
            args.val_per_condition,
            ctx.seed,
        )?;
    }
    write_json(&out, &manifest)?;
    let (counts, text, csv) = summary(&manifest);
    let mut text = format!("ratio {}  k {}\n{text}", manifest.ratio, manifest.k_augs);
    if skipped > 0 {
        text.push_str(&format!(
            "skipped {skipped} augmentations of non-train images\n"
        ));
    }
    text.push_str(&format!("wrote {}\n", out.display()));
    Ok(Output::new(
        json!({
            "manifest": out,
            "ratio": manifest.ratio,
            "k_augs": manifest.k_augs,
            "alpha": manifest.alpha,
            "grouped": args.minibatch,
            "counts": counts,
            "skipped_augmentations": skipped,
        }),
        text,
    )
    .with_csv(csv))
}

pub fn folds(ctx: &Ctx, args: &FoldsArgs) -> CmdResult {
    if args.k < 2 {
        return Err(CliError::flag("k", "must be at least 2"));
    }
    let out = ctx.file_or(&args.out, "folds.json");
    let manifest = read_manifest(&args.manifest)?;
    let folds = cv_folds_manifest(&manifest, args.k, ctx.seed)?;
    write_json(&out, &folds)?;
    let mut text = String::new();
    let mut csv = String::from("fold,train,holdout\n");
    let rows: Vec<_> = folds
        .iter()
        .map(|f| {
            text.push_str(&format!(
                "fold {}  train {:>5}  holdout {:>5}\n",
                f.index,
                f.train.len(),
                f.holdout.len()
            ));
            csv.push_str(&format!(
                "{},{},{}\n",
                f.index,
                f.train.len(),
                f.holdout.len()
            ));
            json!({ "index": f.index, "train": f.train.len(), "holdout": f.holdout.len() })
        })
        .collect();
    text.push_str(&format!("wrote {}\n", out.display()));
    Ok(Output::new(json!({ "folds_file": out, "folds": rows }), text).with_csv(csv))
}
