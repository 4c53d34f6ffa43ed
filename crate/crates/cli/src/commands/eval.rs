use std::fs;
use std::path::{Path, PathBuf};

use augforge::metrics::{
    coco_thresholds, evaluate_detections, group_by_image, miou, Detection, GroundTruth, MetricKey,
    MetricSet, SegPrediction,
};
use augforge::scene_io::read_segmap_png;
use augforge::synthetic::ground_truth;
use serde_json::json;

use super::{load_scene_dir, par_map, read_jsonl, CmdResult, Ctx};
use crate::cli::{EvalDetArgs, EvalSegArgs, IouSchedule};
use crate::error::{CliError, CliResult};
use crate::output::Output;

fn metric_lines(metrics: &MetricSet<f64>) -> (String, String) {
    let mut text = String::new();
    let mut csv = String::from("metric,value\n");
    for (k, v) in metrics.iter() {
        text.push_str(&format!("{:<6} {:.4}\n", k.label(), v));
        csv.push_str(&format!("{},{v}\n", k.as_str()));
    }
    (text, csv)
}

fn read_gts(path: &Path) -> CliResult<Vec<GroundTruth<f64>>> {
    if path.is_dir() {
        Ok(ground_truth(&load_scene_dir(path)?))
    } else {
        let gts: Vec<GroundTruth<f64>> = read_jsonl(path)?;
        for (i, g) in gts.iter().enumerate() {
            g.bbox.check_geometry().map_err(|e| {
                CliError::invalid(format!("{}: record {}: {e}", path.display(), i + 1))
            })?;
        }
        Ok(gts)
    }
}

pub fn eval_det(_ctx: &Ctx, args: &EvalDetArgs) -> CmdResult {
    if !(args.match_iou > 0.0 && args.match_iou <= 1.0) {
        return Err(CliError::flag(
            "match-iou",
            format!("{} outside (0, 1]", args.match_iou),
        ));
    }
    let factors = args.ledger.validate()?;
    let preds: Vec<Detection<f64>> = read_jsonl(&args.preds)?;
    for (i, d) in preds.iter().enumerate() {
        d.check().map_err(|e| {
            CliError::invalid(format!("{}: record {}: {e}", args.preds.display(), i + 1))
        })?;
    }
    let gts = read_gts(&args.gts)?;
    let images = group_by_image(preds, gts);
    let thresholds = match args.iou_thresholds {
        IouSchedule::Coco => coco_thresholds(),
        IouSchedule::Voc => vec![0.5],
    };
    let report = evaluate_detections(&images, &thresholds, args.match_iou)?;
    let metrics = report.metric_set();
    let record = args.ledger.record(factors, metrics.clone())?;
    let (mut text, csv) = metric_lines(&metrics);
    text.push_str(&format!(
        "TP {}  FP {}  FN {}  images {}\n",
        report.tp, report.fp, report.fn_, report.images
    ));
    if let Some(r) = &record {
        text.push_str(&format!(
            "recorded run {} fold {}\n",
            r.run_id, r.fold_index
        ));
    }
    Ok(Output::new(json!({ "report": report, "ledger_record": record }), text).with_csv(csv))
}

/// `<id>.png` files of a directory, sorted by id.
fn png_ids(dir: &Path) -> CliResult<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        if let Some(stem) = entry
            .file_name()
            .to_str()
            .and_then(|n| n.strip_suffix(".png"))
        {
            ids.push(stem.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

fn gt_path(dir: &Path, id: &str) -> CliResult<PathBuf> {
    [format!("{id}_seg.png"), format!("{id}.png")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            CliError::Io(format!(
                "{}: no ground truth {id}_seg.png or {id}.png",
                dir.display()
            ))
        })
}

pub fn eval_seg(_ctx: &Ctx, args: &EvalSegArgs) -> CmdResult {
    if !(1..=256).contains(&args.num_classes) {
        return Err(CliError::flag("num-classes", "must be within 1-256"));
    }
    let factors = args.ledger.validate()?;
    let ids = png_ids(&args.preds)?;
    if ids.is_empty() {
        return Err(CliError::invalid(format!(
            "{}: no <id>.png predictions found",
            args.preds.display()
        )));
    }
    let pairs = par_map(&ids, |_, id| {
        let pred_path = args.preds.join(format!("{id}.png"));
        let pred = read_segmap_png(&pred_path)
            .map_err(|e| CliError::from(e).context(pred_path.display()))?;
        let gp = gt_path(&args.gts, id)?;
        let gt = read_segmap_png(&gp).map_err(|e| CliError::from(e).context(gp.display()))?;
        Ok(SegPrediction {
            pred,
            gt,
            num_classes: args.num_classes,
            ignore_index: args.ignore_index,
        })
    })?;
    let report = miou::<f64>(&pairs)?;
    let metrics: MetricSet<f64> = report
        .miou
        .map(|v| (MetricKey::Miou, v))
        .into_iter()
        .collect();
    let record = args.ledger.record(factors, metrics.clone())?;
    let (mut text, csv) = metric_lines(&metrics);
    if report.miou.is_none() {
        text.push_str("mIoU undefined: no scored ground-truth pixels\n");
    }
    for (c, v) in &report.per_class_iou {
        text.push_str(&format!("  class {c:>3}  IoU {v:.4}\n"));
    }
    if let Some(r) = &record {
        text.push_str(&format!(
            "recorded run {} fold {}\n",
            r.run_id, r.fold_index
        ));
    }
    Ok(Output::new(
        json!({ "images": ids.len(), "report": report, "ledger_record": record }),
        text,
    )
    .with_csv(csv))
}
