use std::collections::BTreeMap;

use image::GrayImage;
use serde::Serialize;

use super::MetricsError;
use crate::scalar::Scalar;

/// A predicted class raster paired with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SegPrediction {
    pub pred: GrayImage,
    pub gt: GrayImage,
    pub num_classes: usize,
    /// Pixels whose ground truth carries this value are not scored.
    pub ignore_index: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiouReport<T = f64> {
    /// Mean over classes present in the (non-ignored) ground truth.
    pub miou: Option<T>,
    /// IoU of every class with a non-empty union, including classes that
    /// only appear in predictions.
    pub per_class_iou: BTreeMap<u8, T>,
    pub scored_pixels: u64,
}

/// Dataset-level mIoU: intersections and unions are accumulated over all
/// pairs before dividing.
pub fn miou<T: Scalar>(pairs: &[SegPrediction]) -> Result<MiouReport<T>, MetricsError> {
    let mut inter: BTreeMap<u8, u64> = BTreeMap::new();
    let mut union: BTreeMap<u8, u64> = BTreeMap::new();
    let mut in_gt: BTreeMap<u8, u64> = BTreeMap::new();
    let mut scored = 0u64;
    for (index, p) in pairs.iter().enumerate() {
        if p.pred.dimensions() != p.gt.dimensions() {
            return Err(MetricsError::ShapeMismatch {
                index,
                pred_w: p.pred.width(),
                pred_h: p.pred.height(),
                gt_w: p.gt.width(),
                gt_h: p.gt.height(),
            });
        }
        let valid = |v: u8| (v as usize) < p.num_classes || Some(v) == p.ignore_index;
        for (&pv, &gv) in p.pred.as_raw().iter().zip(p.gt.as_raw()) {
            for v in [pv, gv] {
                if !valid(v) {
                    return Err(MetricsError::InvalidClass {
                        index,
                        value: v,
                        num_classes: p.num_classes,
                    });
                }
            }
            if Some(gv) == p.ignore_index {
                continue;
            }
            scored += 1;
            *in_gt.entry(gv).or_default() += 1;
            if pv == gv {
                *inter.entry(gv).or_default() += 1;
                *union.entry(gv).or_default() += 1;
            } else {
                *union.entry(gv).or_default() += 1;
                *union.entry(pv).or_default() += 1;
            }
        }
    }
    let per_class_iou: BTreeMap<u8, T> = union
        .iter()
        .map(|(&c, &u)| {
            let i = inter.get(&c).copied().unwrap_or(0);
            (c, T::of(i as f64) / T::of(u as f64))
        })
        .collect();
    let present: Vec<T> = in_gt.keys().map(|c| per_class_iou[c]).collect();
    let miou = (!present.is_empty())
        .then(|| present.iter().copied().sum::<T>() / T::of_usize(present.len()));
    Ok(MiouReport {
        miou,
        per_class_iou,
        scored_pixels: scored,
    })
}
