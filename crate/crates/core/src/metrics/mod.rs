//! Robustness metrics: AP / mAP / mAP50, vanishing and fabrication ratios,
//! and segmentation mIoU.

mod detection;
mod segmentation;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub use detection::{
    average_precision, coco_thresholds, evaluate_detections, fabrication_ratio, group_by_image,
    iou, match_detections, match_images, mean_ap, precision_recall_points, vanishing_ratio,
    ClassAp, Detection, DetectionOutcome, DetectionReport, GroundTruth, GtOutcome, ImageSample,
    MatchResult, MeanAp,
};
pub use segmentation::{miou, MiouReport, SegPrediction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("class {class_id} has no ground truth; its AP is undefined")]
    NoGroundTruth { class_id: u32 },
    #[error("vanishing ratio undefined: no ground-truth objects (TP + FN = 0)")]
    NoGroundTruthObjects,
    #[error("fabrication ratio undefined: no predictions (TP + FP = 0)")]
    NoPredictions,
    #[error("prediction is {pred_w}x{pred_h} but ground truth is {gt_w}x{gt_h} (pair {index})")]
    ShapeMismatch {
        index: usize,
        pred_w: u32,
        pred_h: u32,
        gt_w: u32,
        gt_h: u32,
    },
    #[error("class value {value} out of range for {num_classes} classes (pair {index})")]
    InvalidClass {
        index: usize,
        value: u8,
        num_classes: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Whether larger or smaller values of a metric are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Self::HigherIsBetter => "↑",
            Self::LowerIsBetter => "↓",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKey {
    Map,
    Map50,
    Vr,
    Fr,
    Miou,
}

impl MetricKey {
    pub const ALL: [MetricKey; 5] = [Self::Map, Self::Map50, Self::Fr, Self::Vr, Self::Miou];

    pub fn direction(self) -> Direction {
        match self {
            Self::Map | Self::Map50 | Self::Miou => Direction::HigherIsBetter,
            Self::Vr | Self::Fr => Direction::LowerIsBetter,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Map => "map",
            Self::Map50 => "map50",
            Self::Vr => "vr",
            Self::Fr => "fr",
            Self::Miou => "miou",
        }
    }

    /// Display label as used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::Map => "mAP",
            Self::Map50 => "mAP50",
            Self::Vr => "VR",
            Self::Fr => "FR",
            Self::Miou => "mIoU",
        }
    }
}

impl fmt::Display for MetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric `{0}` (expected map|map50|vr|fr|miou)")]
pub struct UnknownMetric(pub String);

impl FromStr for MetricKey {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "map" => Ok(Self::Map),
            "map50" => Ok(Self::Map50),
            "vr" => Ok(Self::Vr),
            "fr" => Ok(Self::Fr),
            "miou" => Ok(Self::Miou),
            _ => Err(UnknownMetric(s.to_string())),
        }
    }
}

/// A named bundle of metric values, e.g. one model evaluated on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricSet<T = f64>(pub BTreeMap<MetricKey, T>);

impl<T: Scalar> MetricSet<T> {
    pub fn new() -> Self {
        Self(BTreeMap::new())
    }

    pub fn with(mut self, key: MetricKey, value: T) -> Self {
        self.0.insert(key, value);
        self
    }

    pub fn insert(&mut self, key: MetricKey, value: T) {
        self.0.insert(key, value);
    }

    pub fn get(&self, key: MetricKey) -> Option<T> {
        self.0.get(&key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = MetricKey> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MetricKey, T)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T: Scalar> Default for MetricSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> FromIterator<(MetricKey, T)> for MetricSet<T> {
    fn from_iter<I: IntoIterator<Item = (MetricKey, T)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
