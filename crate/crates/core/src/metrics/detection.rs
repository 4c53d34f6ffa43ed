use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{MetricKey, MetricSet, MetricsError};
use crate::scalar::Scalar;
use crate::scene_io::BoxAnnotation;

/// One model prediction. Serialized flat: `image_id, class_id, x_min,
/// y_min, x_max, y_max, confidence`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection<T = f64> {
    #[serde(default)]
    pub image_id: String,
    #[serde(flatten)]
    pub bbox: BoxAnnotation<T>,
    pub confidence: T,
}

impl<T: Scalar> Detection<T> {
    pub fn new(class_id: u32, x_min: T, y_min: T, x_max: T, y_max: T, confidence: T) -> Self {
        Self {
            image_id: String::new(),
            bbox: BoxAnnotation::new(class_id, x_min, y_min, x_max, y_max),
            confidence,
        }
    }

    pub fn class_id(&self) -> u32 {
        self.bbox.class_id
    }

    pub fn check(&self) -> Result<(), String> {
        self.bbox.check_geometry()?;
        if !(self.confidence >= T::zero() && self.confidence <= T::one()) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        Ok(())
    }
}

/// A ground-truth box tagged with the image it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T = f64> {
    #[serde(default)]
    pub image_id: String,
    #[serde(flatten)]
    pub bbox: BoxAnnotation<T>,
}

/// Predictions and ground truth for a single image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample<T = f64> {
    pub image_id: String,
    pub preds: Vec<Detection<T>>,
    pub gts: Vec<BoxAnnotation<T>>,
}

impl<T: Scalar> ImageSample<T> {
    pub fn new(preds: Vec<Detection<T>>, gts: Vec<BoxAnnotation<T>>) -> Self {
        Self {
            image_id: String::new(),
            preds,
            gts,
        }
    }
}

/// Pairs predictions with ground truth by `image_id`. Images appear in
/// sorted id order; an image present on only one side gets an empty list
/// on the other.
pub fn group_by_image<T: Scalar>(
    preds: Vec<Detection<T>>,
    gts: Vec<GroundTruth<T>>,
) -> Vec<ImageSample<T>> {
    let mut map: BTreeMap<String, ImageSample<T>> = BTreeMap::new();
    let entry = |map: &mut BTreeMap<String, ImageSample<T>>, id: &str| {
        map.entry(id.to_string())
            .or_insert_with(|| ImageSample {
                image_id: id.to_string(),
                preds: Vec::new(),
                gts: Vec::new(),
            })
            .image_id
            .clone()
    };
    for g in gts {
        let id = entry(&mut map, &g.image_id);
        map.get_mut(&id).unwrap().gts.push(g.bbox);
    }
    for p in preds {
        let id = entry(&mut map, &p.image_id);
        map.get_mut(&id).unwrap().preds.push(p);
    }
    map.into_values().collect()
}

/// Intersection over union in continuous coordinates.
pub fn iou<T: Scalar>(a: &BoxAnnotation<T>, b: &BoxAnnotation<T>) -> T {
    let iw = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let ih = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if iw <= T::zero() || ih <= T::zero() {
        return T::zero();
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).min(T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionOutcome {
    TruePositive { gt: usize },
    FalsePositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtOutcome {
    Matched { detection: usize },
    Missed,
}

/// Outcome of greedy matching. Counts are additive, so results for
/// several images can be folded with [`MatchResult::merge`] in any order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchResult {
    pub detections: Vec<DetectionOutcome>,
    pub ground_truth: Vec<GtOutcome>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MatchResult {
    /// Counts-only combination. Per-item outcomes are concatenated.
    pub fn merge(mut self, other: MatchResult) -> MatchResult {
        self.detections.extend(other.detections);
        self.ground_truth.extend(other.ground_truth);
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self
    }
}

/// Detection indices ordered by descending confidence, ties by index.
fn confidence_order<T: Scalar>(preds: &[Detection<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence
            .partial_cmp(&preds[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Greedy matching: detections in descending confidence each claim the
/// unmatched same-class ground truth with the highest IoU at or above
/// `iou_threshold`; equal IoU goes to the lowest ground-truth index.
pub fn match_detections<T: Scalar>(
    preds: &[Detection<T>],
    gts: &[BoxAnnotation<T>],
    iou_threshold: T,
) -> MatchResult {
    let mut detections = vec![DetectionOutcome::FalsePositive; preds.len()];
    let mut ground_truth = vec![GtOutcome::Missed; gts.len()];
    let mut tp = 0;
    for d in confidence_order(preds) {
        let det = &preds[d];
        let mut best: Option<(usize, T)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt.class_id != det.class_id() || ground_truth[g] != GtOutcome::Missed {
                continue;
            }
            let v = iou(&det.bbox, gt);
            if v >= iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            detections[d] = DetectionOutcome::TruePositive { gt: g };
            ground_truth[g] = GtOutcome::Matched { detection: d };
            tp += 1;
        }
    }
    MatchResult {
        fp: preds.len() - tp,
        fn_: gts.len() - tp,
        tp,
        detections,
        ground_truth,
    }
}

/// Matches every image independently and merges the results.
pub fn match_images<T: Scalar>(images: &[ImageSample<T>], iou_threshold: T) -> MatchResult {
    images
        .iter()
        .map(|img| match_detections(&img.preds, &img.gts, iou_threshold))
        .fold(MatchResult::default(), MatchResult::merge)
}

/// Eq. VR = FN / (TP + FN).
pub fn vanishing_ratio<T: Scalar>(m: &MatchResult) -> Result<T, MetricsError> {
    let denom = m.tp + m.fn_;
    if denom == 0 {
        return Err(MetricsError::NoGroundTruthObjects);
    }
    Ok(T::of_usize(m.fn_) / T::of_usize(denom))
}

/// FR = FP / (TP + FP).
pub fn fabrication_ratio<T: Scalar>(m: &MatchResult) -> Result<T, MetricsError> {
    let denom = m.tp + m.fp;
    if denom == 0 {
        return Err(MetricsError::NoPredictions);
    }
    Ok(T::of_usize(m.fp) / T::of_usize(denom))
}

/// (recall, precision) after each detection of `class_id`, swept across
/// all images in descending confidence. Also returns the ground-truth count.
pub fn precision_recall_points<T: Scalar>(
    images: &[ImageSample<T>],
    class_id: u32,
    iou_threshold: T,
) -> (Vec<(T, T)>, usize) {
    let mut scored: Vec<(T, bool)> = Vec::new();
    let mut n_gt = 0;
    for img in images {
        let preds: Vec<Detection<T>> = img
            .preds
            .iter()
            .filter(|d| d.class_id() == class_id)
            .cloned()
            .collect();
        let gts: Vec<BoxAnnotation<T>> = img
            .gts
            .iter()
            .filter(|g| g.class_id == class_id)
            .copied()
            .collect();
        n_gt += gts.len();
        let m = match_detections(&preds, &gts, iou_threshold);
        scored.extend(preds.iter().zip(&m.detections).map(|(d, o)| {
            (
                d.confidence,
                matches!(o, DetectionOutcome::TruePositive { .. }),
            )
        }));
    }
    // stable: equal confidences keep image order, then detection order
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut points = Vec::with_capacity(scored.len());
    let (mut tp, mut seen) = (0usize, 0usize);
    for (_, is_tp) in scored {
        seen += 1;
        tp += usize::from(is_tp);
        let recall = if n_gt == 0 {
            T::zero()
        } else {
            T::of_usize(tp) / T::of_usize(n_gt)
        };
        points.push((recall, T::of_usize(tp) / T::of_usize(seen)));
    }
    (points, n_gt)
}

/// All-point interpolated area: sum over consecutive points (with a
/// recall-0 anchor) of `(r_{i+1} - r_i) * max_{j >= i+1} p_j`.
fn area_under_envelope<T: Scalar>(points: &[(T, T)]) -> T {
    let mut envelope = vec![T::zero(); points.len()];
    let mut running = T::zero();
    for (i, &(_, p)) in points.iter().enumerate().rev() {
        running = running.max(p);
        envelope[i] = running;
    }
    let mut prev_recall = T::zero();
    let mut ap = T::zero();
    for (&(r, _), &p) in points.iter().zip(&envelope) {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    ap
}

/// Average precision of one class at one IoU threshold.
pub fn average_precision<T: Scalar>(
    images: &[ImageSample<T>],
    class_id: u32,
    iou_threshold: T,
) -> Result<T, MetricsError> {
    let (points, n_gt) = precision_recall_points(images, class_id, iou_threshold);
    if n_gt == 0 {
        return Err(MetricsError::NoGroundTruth { class_id });
    }
    Ok(area_under_envelope(&points))
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds<T: Scalar>() -> Vec<T> {
    (0..10)
        .map(|i| T::of((50 + 5 * i) as f64 / 100.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAp<T = f64> {
    /// Mean AP over the requested thresholds.
    pub ap: T,
    pub ap50: T,
    pub gt_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanAp<T = f64> {
    /// `None` when no class has ground truth.
    pub map: Option<T>,
    pub map50: Option<T>,
    pub per_class: BTreeMap<u32, ClassAp<T>>,
    /// Classes that only occur in predictions; excluded from the means.
    pub excluded_classes: Vec<u32>,
}

/// mAP over classes with at least one ground-truth box, each class's AP
/// averaged over `iou_thresholds`. `map50` always uses 0.5.
pub fn mean_ap<T: Scalar>(
    images: &[ImageSample<T>],
    iou_thresholds: &[T],
) -> Result<MeanAp<T>, MetricsError> {
    if iou_thresholds.is_empty() {
        return Err(MetricsError::InvalidArgument("no IoU thresholds".into()));
    }
    if let Some(t) = iou_thresholds
        .iter()
        .find(|t| !(**t > T::zero() && **t <= T::one()))
    {
        return Err(MetricsError::InvalidArgument(format!(
            "IoU threshold {t} outside (0, 1]"
        )));
    }
    let gt_classes: BTreeSet<u32> = images
        .iter()
        .flat_map(|i| i.gts.iter().map(|g| g.class_id))
        .collect();
    let pred_classes: BTreeSet<u32> = images
        .iter()
        .flat_map(|i| i.preds.iter().map(|d| d.class_id()))
        .collect();
    let half = T::of(0.5);
    let mut per_class = BTreeMap::new();
    for &c in &gt_classes {
        let mut sum = T::zero();
        for &t in iou_thresholds {
            sum += average_precision(images, c, t)?;
        }
        let gt_count = images
            .iter()
            .map(|i| i.gts.iter().filter(|g| g.class_id == c).count())
            .sum();
        per_class.insert(
            c,
            ClassAp {
                ap: sum / T::of_usize(iou_thresholds.len()),
                ap50: average_precision(images, c, half)?,
                gt_count,
            },
        );
    }
    let k = per_class.len();
    let (map, map50) = if k == 0 {
        (None, None)
    } else {
        let n = T::of_usize(k);
        (
            Some(per_class.values().map(|c| c.ap).sum::<T>() / n),
            Some(per_class.values().map(|c| c.ap50).sum::<T>() / n),
        )
    };
    Ok(MeanAp {
        map,
        map50,
        per_class,
        excluded_classes: pred_classes.difference(&gt_classes).copied().collect(),
    })
}

/// Everything `eval-det` reports for one prediction set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport<T = f64> {
    pub map: Option<T>,
    pub map50: Option<T>,
    pub vr: Option<T>,
    pub fr: Option<T>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub iou_thresholds: Vec<T>,
    pub match_iou: T,
    pub images: usize,
    pub per_class: BTreeMap<u32, ClassAp<T>>,
    pub excluded_classes: Vec<u32>,
}

impl<T: Scalar> DetectionReport<T> {
    /// Defined metrics as a set; undefined ones are left out.
    pub fn metric_set(&self) -> MetricSet<T> {
        [
            (MetricKey::Map, self.map),
            (MetricKey::Map50, self.map50),
            (MetricKey::Vr, self.vr),
            (MetricKey::Fr, self.fr),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

pub fn evaluate_detections<T: Scalar>(
    images: &[ImageSample<T>],
    iou_thresholds: &[T],
    match_iou: T,
) -> Result<DetectionReport<T>, MetricsError> {
    if !(match_iou > T::zero() && match_iou <= T::one()) {
        return Err(MetricsError::InvalidArgument(format!(
            "match IoU {match_iou} outside (0, 1]"
        )));
    }
    let m = mean_ap(images, iou_thresholds)?;
    let matched = match_images(images, match_iou);
    Ok(DetectionReport {
        map: m.map,
        map50: m.map50,
        vr: vanishing_ratio(&matched).ok(),
        fr: fabrication_ratio(&matched).ok(),
        tp: matched.tp,
        fp: matched.fp,
        fn_: matched.fn_,
        iou_thresholds: iou_thresholds.to_vec(),
        match_iou,
        images: images.len(),
        per_class: m.per_class,
        excluded_classes: m.excluded_classes,
    })
}
