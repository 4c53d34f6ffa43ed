//! Weather augmentation and robustness tooling for camera perception.
//!
//! - [`scene_io`]: scene packets (RGB, depth, segmentation, boxes) on disk.
//! - [`augment`]: fog, rain, wet-road reflection and flip kernels.
//! - [`metrics`]: AP / mAP / mAP50, vanishing and fabrication ratios, mIoU.
//! - [`search`]: grid and seeded random search over augmentation parameters.
//! - [`latent`]: logistic probe on exported embeddings for latent scoring.
//! - [`strategy`]: training manifests (ratios, groups, loss weights, folds).
//! - [`experiment`]: plans, run ledger, tables and paired tests.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for callers that do not care.

pub mod augment;
pub mod experiment;
pub mod latent;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod scene_io;
pub mod search;
pub mod strategy;
pub mod synthetic;

pub use scalar::Scalar;

pub type Detection32 = metrics::Detection<f32>;
pub type Detection64 = metrics::Detection<f64>;
pub type Box32 = scene_io::BoxAnnotation<f32>;
pub type Box64 = scene_io::BoxAnnotation<f64>;
pub type MetricSet32 = metrics::MetricSet<f32>;
pub type MetricSet64 = metrics::MetricSet<f64>;
pub type DetectionReport32 = metrics::DetectionReport<f32>;
pub type DetectionReport64 = metrics::DetectionReport<f64>;
pub type MiouReport32 = metrics::MiouReport<f32>;
pub type MiouReport64 = metrics::MiouReport<f64>;
pub type SearchTrace32 = search::SearchTrace<f32>;
pub type SearchTrace64 = search::SearchTrace<f64>;
pub type LinearClassifier32 = latent::LinearClassifier<f32>;
pub type LinearClassifier64 = latent::LinearClassifier<f64>;
pub type TestResult32 = experiment::TestResult<f32>;
pub type TestResult64 = experiment::TestResult<f64>;
