//! Physics-based weather kernels, horizontal flip, and the serializable
//! [`AugmentationSpec`] that binds a kernel to parameters and a seed.
//!
//! All pixel math runs in normalized `f32` and is quantized once at the end
//! of each kernel with round-half-to-even. Randomness comes from
//! [`crate::rng::SeededRng`]; composite children use
//! `derive_seed(seed, child_index)`.

mod flip;
mod fog;
mod rain;
pub mod raster;
mod reflection;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use flip::{flip_box, horizontal_flip};
pub use fog::{apply_fog, fog_channel, transmission, FogParams};
pub use rain::{
    apply_rain, streak_anchors, streak_count, streak_layer, RainParams, STREAK_LEVEL,
    WET_DARKENING, WET_REFLECTION_ATTENUATION, WET_REFLECTION_BLUR,
};
pub use reflection::{apply_wet_road_reflection, ReflectionParams, CITYSCAPES_ROAD};

use crate::rng::{derive_seed, SeededRng};
use crate::scene_io::{ConditionTag, SceneError, ScenePacket};
use crate::search::{ParamSpace, ParamVector};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{kernel} needs a segmentation map")]
    MissingSegmap { kernel: &'static str },
    #[error("{kernel} has no parameter named {name:?}")]
    UnknownParam { kernel: &'static str, name: String },
    #[error("requested {requested} unique draws but the space holds {available}")]
    SpaceTooSmall { requested: usize, available: u128 },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl AugmentError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidParams(msg.into())
    }
}

/// Kernel name plus its parameter record. Serialized as
/// `{"kernel": "fog", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", content = "params", rename_all = "snake_case")]
pub enum KernelParams {
    Fog(FogParams),
    Rain(RainParams),
    WetReflection(ReflectionParams),
    Hflip,
    Composite(Vec<AugmentationSpec>),
}

impl KernelParams {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fog(_) => "fog",
            Self::Rain(_) => "rain",
            Self::WetReflection(_) => "wet_reflection",
            Self::Hflip => "hflip",
            Self::Composite(_) => "composite",
        }
    }

    /// Default parameters for a kernel name. `composite` starts empty.
    pub fn default_for(kernel: &str) -> Result<Self, AugmentError> {
        Ok(match kernel {
            "fog" => Self::Fog(FogParams::default()),
            "rain" => Self::Rain(RainParams::default()),
            "wet_reflection" => Self::WetReflection(ReflectionParams::default()),
            "hflip" => Self::Hflip,
            "composite" => Self::Composite(Vec::new()),
            other => return Err(AugmentError::invalid(format!("unknown kernel {other:?}"))),
        })
    }

    /// Copy with every named value in `point` written into the parameter
    /// record. Composite specs forward each value to every child that
    /// accepts it.
    pub fn with_point(&self, point: &ParamVector) -> Result<Self, AugmentError> {
        let mut out = self.clone();
        for (name, v) in point.iter() {
            out.set(name, v)?;
        }
        Ok(out)
    }

    fn set(&mut self, name: &str, v: f64) -> Result<(), AugmentError> {
        match self {
            Self::Fog(p) => p.set(name, v),
            Self::Rain(p) => p.set(name, v),
            Self::WetReflection(p) => p.set(name, v),
            Self::Hflip => Err(AugmentError::UnknownParam {
                kernel: "hflip",
                name: name.into(),
            }),
            Self::Composite(children) => {
                let mut hit = false;
                for c in children.iter_mut() {
                    match c.params.set(name, v) {
                        Ok(()) => hit = true,
                        Err(AugmentError::UnknownParam { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                if hit {
                    Ok(())
                } else {
                    Err(AugmentError::UnknownParam {
                        kernel: "composite",
                        name: name.into(),
                    })
                }
            }
        }
    }

    /// Whether the parameters leave every pixel unchanged by construction:
    /// fog with `beta = 0`, rain with no streaks and no wetness, reflection
    /// with zero reflectivity. Such specs also keep the condition tag.
    pub fn is_identity(&self) -> bool {
        match self {
            Self::Fog(p) => p.beta == 0.0,
            Self::Rain(p) => p.streak_density == 0.0 && p.wetness == 0.0,
            Self::WetReflection(p) => p.reflectivity == 0.0,
            Self::Hflip => false,
            Self::Composite(children) => children.iter().all(|c| c.params.is_identity()),
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        match self {
            Self::Fog(p) => p.validate(),
            Self::Rain(p) => p.validate(),
            Self::WetReflection(p) => p.validate(),
            Self::Hflip => Ok(()),
            Self::Composite(children) => children.iter().try_for_each(|c| c.params.validate()),
        }
    }
}

/// A kernel with bound parameters and a seed: the unit of reproducible
/// augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    #[serde(flatten)]
    pub params: KernelParams,
    #[serde(default)]
    pub seed: u64,
}

impl AugmentationSpec {
    pub fn new(params: KernelParams, seed: u64) -> Self {
        Self { params, seed }
    }

    pub fn hflip() -> Self {
        Self::new(KernelParams::Hflip, 0)
    }

    pub fn composite(children: Vec<AugmentationSpec>, seed: u64) -> Self {
        Self::new(KernelParams::Composite(children), seed)
    }

    pub fn kernel(&self) -> &'static str {
        self.params.name()
    }

    /// Condition tag of a scene tagged `input` after this spec is applied.
    pub fn resulting_tag(&self, input: ConditionTag) -> ConditionTag {
        match &self.params {
            p if p.is_identity() => input,
            KernelParams::Fog(_) => ConditionTag::Fog,
            KernelParams::Rain(_) | KernelParams::WetReflection(_) => ConditionTag::Rain,
            KernelParams::Hflip => input,
            KernelParams::Composite(children) => {
                children.iter().fold(input, |tag, c| c.resulting_tag(tag))
            }
        }
    }
}

/// Applies `spec` to `scene`. Weather kernels replace the image and set the
/// condition tag (kept for identity parameters); hflip also mirrors depth, segmap and boxes; composite
/// threads the packet through its children in order.
pub fn apply_spec(
    scene: &ScenePacket,
    spec: &AugmentationSpec,
) -> Result<ScenePacket, AugmentError> {
    let condition_tag = spec.resulting_tag(scene.condition_tag);
    match &spec.params {
        KernelParams::Fog(p) => {
            let image = apply_fog(scene, p)?;
            Ok(ScenePacket {
                image,
                condition_tag,
                ..scene.clone()
            })
        }
        KernelParams::Rain(p) => {
            let image = apply_rain(scene, p, spec.seed)?;
            Ok(ScenePacket {
                image,
                condition_tag,
                ..scene.clone()
            })
        }
        KernelParams::WetReflection(p) => {
            let image = apply_wet_road_reflection(scene, p)?;
            Ok(ScenePacket {
                image,
                condition_tag,
                ..scene.clone()
            })
        }
        KernelParams::Hflip => {
            scene.validate()?;
            Ok(horizontal_flip(scene))
        }
        KernelParams::Composite(children) => {
            let mut cur = scene.clone();
            for (i, child) in children.iter().enumerate() {
                let child = AugmentationSpec {
                    params: child.params.clone(),
                    seed: derive_seed(spec.seed, i as u64),
                };
                cur = apply_spec(&cur, &child)?;
            }
            Ok(cur)
        }
    }
}

/// Draw attempts per requested point before giving up on a space that
/// rounds many samples to the same value.
const DRAW_ATTEMPTS_PER_POINT: usize = 1000;

/// `k` pairwise-distinct points of `space` bound into specs over `base`.
/// Spec `j` carries seed `derive_seed(seed, j)`.
pub fn sample_unique_specs(
    base: &KernelParams,
    space: &ParamSpace,
    k: usize,
    seed: u64,
) -> Result<Vec<(ParamVector, AugmentationSpec)>, AugmentError> {
    if k == 0 {
        return Err(AugmentError::invalid("k must be at least 1"));
    }
    space
        .validate()
        .map_err(|e| AugmentError::invalid(e.to_string()))?;
    if let Some(n) = space.discrete_cardinality() {
        if n < k as u128 {
            return Err(AugmentError::SpaceTooSmall {
                requested: k,
                available: n,
            });
        }
    }
    let mut rng = SeededRng::new(seed);
    let mut points: Vec<ParamVector> = Vec::with_capacity(k);
    let mut attempts = 0;
    while points.len() < k {
        if attempts == k * DRAW_ATTEMPTS_PER_POINT {
            return Err(AugmentError::SpaceTooSmall {
                requested: k,
                available: points.len() as u128,
            });
        }
        attempts += 1;
        let p = space.sample(&mut rng);
        if !points.iter().any(|q| q.same_point(&p)) {
            points.push(p);
        }
    }
    points
        .into_iter()
        .enumerate()
        .map(|(j, p)| {
            let params = base.with_point(&p)?;
            params.validate()?;
            Ok((
                p,
                AugmentationSpec::new(params, derive_seed(seed, j as u64)),
            ))
        })
        .collect()
}

/// Renders `k` unique augmentations of `scene`. Output packet ids are
/// `<id>_aug<j>`.
pub fn generate_k_unique(
    scene: &ScenePacket,
    base: &KernelParams,
    space: &ParamSpace,
    k: usize,
    seed: u64,
) -> Result<Vec<(AugmentationSpec, ScenePacket)>, AugmentError> {
    sample_unique_specs(base, space, k, seed)?
        .into_iter()
        .enumerate()
        .map(|(j, (_, spec))| {
            let mut out = apply_spec(scene, &spec)?;
            out.id = format!("{}_aug{j}", scene.id);
            Ok((spec, out))
        })
        .collect()
}
