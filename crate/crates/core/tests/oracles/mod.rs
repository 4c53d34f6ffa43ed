//! Reference implementations written independently of the library, used
//! only to cross-check it. Deliberately naive.

#![allow(dead_code)]

use std::collections::BTreeMap;

use augforge::metrics::{Detection, ImageSample};
use augforge::rng::SeededRng;
use augforge::scene_io::BoxAnnotation;

pub fn box_iou(a: &BoxAnnotation, b: &BoxAnnotation) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let ua = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min)
        - inter;
    if inter == 0.0 {
        0.0
    } else {
        inter / ua
    }
}

/// True/false per detection for one image and class, greedy in
/// confidence order, ties on IoU to the lowest ground-truth index.
fn image_flags(dets: &[&Detection], gts: &[&BoxAnnotation], thr: f64) -> Vec<(f64, bool)> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    // insertion sort keeps equal confidences in input order
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && dets[idx[j - 1]].confidence < dets[idx[j]].confidence {
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut taken = vec![false; gts.len()];
    let mut out = Vec::new();
    for &d in &idx {
        let mut pick: Option<usize> = None;
        for g in 0..gts.len() {
            if taken[g] {
                continue;
            }
            let v = box_iou(&dets[d].bbox, gts[g]);
            if v < thr {
                continue;
            }
            match pick {
                Some(p) if box_iou(&dets[d].bbox, gts[p]) >= v => {}
                _ => pick = Some(g),
            }
        }
        if let Some(g) = pick {
            taken[g] = true;
        }
        out.push((dets[d].confidence, pick.is_some()));
    }
    out
}

/// AP from the definition: for every cutoff `k` of the confidence-sorted
/// list, recall and precision of the top `k`; area is
/// `sum_k (r_k - r_{k-1}) * max_{j >= k} p_j`.
pub fn average_precision(images: &[ImageSample], class_id: u32, thr: f64) -> Option<f64> {
    let mut flags = Vec::new();
    let mut n_gt = 0;
    for img in images {
        let dets: Vec<&Detection> = img
            .preds
            .iter()
            .filter(|d| d.bbox.class_id == class_id)
            .collect();
        let gts: Vec<&BoxAnnotation> = img.gts.iter().filter(|g| g.class_id == class_id).collect();
        n_gt += gts.len();
        flags.extend(image_flags(&dets, &gts, thr));
    }
    if n_gt == 0 {
        return None;
    }
    // stable merge across images by confidence
    let mut sorted: Vec<(f64, bool)> = Vec::new();
    for f in flags {
        let pos = sorted
            .iter()
            .position(|s| s.0 < f.0)
            .unwrap_or(sorted.len());
        sorted.insert(pos, f);
    }
    let k = sorted.len();
    let mut recall = vec![0.0; k + 1];
    let mut precision = vec![0.0; k + 1];
    for cut in 1..=k {
        let tp = sorted[..cut].iter().filter(|s| s.1).count() as f64;
        recall[cut] = tp / n_gt as f64;
        precision[cut] = tp / cut as f64;
    }
    let mut ap = 0.0;
    for cut in 1..=k {
        let best = (cut..=k).map(|j| precision[j]).fold(0.0, f64::max);
        ap += (recall[cut] - recall[cut - 1]) * best;
    }
    Some(ap)
}

/// (mAP over `thresholds`, mAP at 0.5) over classes that have ground truth.
pub fn mean_ap(images: &[ImageSample], thresholds: &[f64]) -> Option<(f64, f64)> {
    let mut classes: Vec<u32> = images
        .iter()
        .flat_map(|i| i.gts.iter().map(|g| g.class_id))
        .collect();
    classes.sort();
    classes.dedup();
    if classes.is_empty() {
        return None;
    }
    let mut m = 0.0;
    let mut m50 = 0.0;
    for &c in &classes {
        let per: f64 = thresholds
            .iter()
            .map(|&t| average_precision(images, c, t).unwrap())
            .sum();
        m += per / thresholds.len() as f64;
        m50 += average_precision(images, c, 0.5).unwrap();
    }
    Some((m / classes.len() as f64, m50 / classes.len() as f64))
}

/// (TP, FP, FN) summed over images, all classes.
pub fn counts(images: &[ImageSample], thr: f64) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fnn) = (0, 0, 0);
    for img in images {
        let mut classes: Vec<u32> = img
            .preds
            .iter()
            .map(|d| d.bbox.class_id)
            .chain(img.gts.iter().map(|g| g.class_id))
            .collect();
        classes.sort();
        classes.dedup();
        for c in classes {
            let dets: Vec<&Detection> = img.preds.iter().filter(|d| d.bbox.class_id == c).collect();
            let gts: Vec<&BoxAnnotation> = img.gts.iter().filter(|g| g.class_id == c).collect();
            let f = image_flags(&dets, &gts, thr);
            let t = f.iter().filter(|x| x.1).count();
            tp += t;
            fp += f.len() - t;
            fnn += gts.len() - t;
        }
    }
    (tp, fp, fnn)
}

/// Per-class IoU and their mean over classes present in ground truth,
/// counting pixels one by one.
pub fn miou(pairs: &[(Vec<u8>, Vec<u8>)], ignore: Option<u8>) -> (Option<f64>, BTreeMap<u8, f64>) {
    let mut inter: BTreeMap<u8, u64> = BTreeMap::new();
    let mut union: BTreeMap<u8, u64> = BTreeMap::new();
    let mut in_gt: BTreeMap<u8, bool> = BTreeMap::new();
    for (pred, gt) in pairs {
        for c in 0u8..=255 {
            if Some(c) == ignore {
                continue;
            }
            for i in 0..gt.len() {
                if Some(gt[i]) == ignore {
                    continue;
                }
                let p = pred[i] == c;
                let g = gt[i] == c;
                if p && g {
                    *inter.entry(c).or_default() += 1;
                }
                if p || g {
                    *union.entry(c).or_default() += 1;
                }
                if g {
                    in_gt.insert(c, true);
                }
            }
        }
    }
    let per: BTreeMap<u8, f64> = in_gt
        .keys()
        .map(|c| (*c, *inter.get(c).unwrap_or(&0) as f64 / union[c] as f64))
        .collect();
    let mean = if per.is_empty() {
        None
    } else {
        Some(per.values().sum::<f64>() / per.len() as f64)
    };
    (mean, per)
}

/// Exact one-sided p-values `(P(W+ >= w), P(W+ <= w))` by enumerating all
/// `2^n` sign assignments over the non-zero differences.
pub fn wilcoxon_enumerated(d: &[f64]) -> (f64, f64, f64) {
    let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = nz.len();
    let ranks: Vec<f64> = nz
        .iter()
        .map(|v| {
            let a = v.abs();
            let less = nz.iter().filter(|u| u.abs() < a).count() as f64;
            let eq = nz.iter().filter(|u| u.abs() == a).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect();
    let w: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let (mut ge, mut le) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if s >= w - 1e-9 {
            ge += 1;
        }
        if s <= w + 1e-9 {
            le += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (w, ge as f64 / total, le as f64 / total)
}

/// Random image set: up to `max_dets` detections, `max_gts` ground-truth
/// boxes, `max_classes` classes, on a coarse grid so that exact IoU ties
/// and overlaps are frequent. Confidences are distinct.
pub fn random_images(
    rng: &mut SeededRng,
    max_dets: usize,
    max_gts: usize,
    max_classes: u32,
) -> Vec<ImageSample> {
    let n_images = 1 + rng.below(2);
    let total_dets = rng.below(max_dets + 1);
    let total_gts = 1 + rng.below(max_gts);
    let mut confs: Vec<f64> = (1..=max_dets)
        .map(|i| i as f64 / (max_dets + 1) as f64)
        .collect();
    rng.shuffle(&mut confs);
    let mut images: Vec<ImageSample> = (0..n_images)
        .map(|i| ImageSample {
            image_id: format!("img{i}"),
            preds: vec![],
            gts: vec![],
        })
        .collect();
    let random_box = |rng: &mut SeededRng| {
        let x0 = rng.below(6) as f64;
        let y0 = rng.below(6) as f64;
        let w = 1 + rng.below(4);
        let h = 1 + rng.below(4);
        let c = rng.below(max_classes as usize) as u32;
        BoxAnnotation::new(c, x0, y0, x0 + w as f64, y0 + h as f64)
    };
    for _ in 0..total_gts {
        let i = rng.below(n_images);
        let b = random_box(rng);
        images[i].gts.push(b);
    }
    for &confidence in confs.iter().take(total_dets) {
        let i = rng.below(n_images);
        // half the detections are perturbed copies of a ground-truth box
        let b = match (rng.below(2), images[i].gts.len()) {
            (0, n) if n > 0 => {
                let g = images[i].gts[rng.below(n)];
                let dx = rng.below(3) as f64 - 1.0;
                BoxAnnotation {
                    x_min: g.x_min + dx * 0.5,
                    x_max: g.x_max + dx * 0.5,
                    ..g
                }
            }
            _ => random_box(rng),
        };
        let image_id = images[i].image_id.clone();
        images[i].preds.push(Detection {
            image_id,
            bbox: b,
            confidence,
        });
    }
    images
}
