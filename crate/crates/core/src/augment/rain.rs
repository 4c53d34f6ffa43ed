//! Seeded rain: wet-road darkening and reflection, then anti-aliased
//! streaks composited over the frame.
//!
//! Streak anchors are drawn from [`SeededRng`] as `x = u * W`, `y = u * H`
//! (two draws per streak, x first). Each streak is a segment of
//! `streak_length_px` centered on its anchor and tilted `streak_angle_deg`
//! from vertical. A pixel's coverage is `max(0, 1 - dist)` where `dist` is
//! the distance from the pixel center to the segment; the streak layer
//! keeps the maximum coverage times `streak_alpha` and is then blurred by
//! `drop_blur_sigma`. The layer is composited toward [`STREAK_LEVEL`].

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::raster::{blur_plane, FloatImage};
use super::reflection::{reflect_in_place, ReflectionParams, CITYSCAPES_ROAD};
use super::AugmentError;
use crate::rng::SeededRng;
use crate::scene_io::ScenePacket;

/// Normalized intensity streaks are blended toward.
pub const STREAK_LEVEL: f32 = 0.9;
/// Fraction of the darkening factor: road pixels scale by `1 - wetness * 0.5`.
pub const WET_DARKENING: f32 = 0.5;
/// Reflection blur used for wet roads, pixels.
pub const WET_REFLECTION_BLUR: f32 = 1.5;
/// Row attenuation used for wet roads.
pub const WET_REFLECTION_ATTENUATION: f32 = 0.97;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RainParams {
    /// Streaks per megapixel.
    pub streak_density: f32,
    /// Streak length in pixels.
    pub streak_length_px: f32,
    /// Tilt from vertical in degrees, `[-45, 45]`.
    pub streak_angle_deg: f32,
    /// Peak streak opacity, `[0, 1]`.
    pub streak_alpha: f32,
    /// Gaussian sigma in pixels applied to the streak layer only.
    pub drop_blur_sigma: f32,
    /// Road darkening, `[0, 1]`.
    pub wetness: f32,
    /// Reflectivity of wet road, `[0, 1]`; the effective mirror weight is
    /// `reflectivity * wetness`.
    pub reflectivity: f32,
    /// Segmentation classes darkened and mirrored as road.
    pub road_class_ids: Vec<u8>,
}

impl Default for RainParams {
    fn default() -> Self {
        Self {
            streak_density: 400.0,
            streak_length_px: 18.0,
            streak_angle_deg: 10.0,
            streak_alpha: 0.35,
            drop_blur_sigma: 0.8,
            wetness: 0.3,
            reflectivity: 0.3,
            road_class_ids: vec![CITYSCAPES_ROAD],
        }
    }
}

impl RainParams {
    /// All knobs off: applying these params is the identity.
    pub fn identity() -> Self {
        Self {
            streak_density: 0.0,
            wetness: 0.0,
            drop_blur_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let unit = |name: &str, v: f32| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(AugmentError::invalid(format!(
                    "{name} {v} must lie in [0, 1]"
                )))
            }
        };
        if !(self.streak_density.is_finite() && self.streak_density >= 0.0) {
            return Err(AugmentError::invalid(format!(
                "streak_density {} must be >= 0",
                self.streak_density
            )));
        }
        if !(self.streak_length_px.is_finite() && self.streak_length_px > 0.0) {
            return Err(AugmentError::invalid(format!(
                "streak_length_px {} must be > 0",
                self.streak_length_px
            )));
        }
        if !(-45.0..=45.0).contains(&self.streak_angle_deg) {
            return Err(AugmentError::invalid(format!(
                "streak_angle_deg {} must lie in [-45, 45]",
                self.streak_angle_deg
            )));
        }
        unit("streak_alpha", self.streak_alpha)?;
        if !(self.drop_blur_sigma.is_finite() && self.drop_blur_sigma >= 0.0) {
            return Err(AugmentError::invalid(format!(
                "drop_blur_sigma {} must be >= 0",
                self.drop_blur_sigma
            )));
        }
        unit("wetness", self.wetness)?;
        unit("reflectivity", self.reflectivity)?;
        if self.road_class_ids.is_empty() {
            return Err(AugmentError::invalid("road_class_ids must not be empty"));
        }
        Ok(())
    }

    pub(crate) fn set(&mut self, name: &str, v: f64) -> Result<(), AugmentError> {
        let v = v as f32;
        match name {
            "streak_density" => self.streak_density = v,
            "streak_length_px" => self.streak_length_px = v,
            "streak_angle_deg" => self.streak_angle_deg = v,
            "streak_alpha" => self.streak_alpha = v,
            "drop_blur_sigma" => self.drop_blur_sigma = v,
            "wetness" => self.wetness = v,
            "reflectivity" => self.reflectivity = v,
            _ => {
                return Err(AugmentError::UnknownParam {
                    kernel: "rain",
                    name: name.into(),
                })
            }
        }
        Ok(())
    }
}

/// `round(density * W * H / 1e6)`, halves rounded away from zero.
pub fn streak_count(width: u32, height: u32, density: f32) -> usize {
    (density as f64 * width as f64 * height as f64 / 1e6).round() as usize
}

/// Streak centers in pixel coordinates, in generation order.
pub fn streak_anchors(width: u32, height: u32, params: &RainParams, seed: u64) -> Vec<(f32, f32)> {
    let n = streak_count(width, height, params.streak_density);
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|_| {
            let x = (rng.next_f64() * width as f64) as f32;
            let y = (rng.next_f64() * height as f64) as f32;
            (x, y)
        })
        .collect()
}

fn segment_distance(px: f32, py: f32, a: (f32, f32), b: (f32, f32)) -> f32 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    libm::sqrtf((px - cx) * (px - cx) + (py - cy) * (py - cy))
}

/// Streak opacity layer before blurring.
pub fn streak_layer(width: u32, height: u32, params: &RainParams, seed: u64) -> Vec<f32> {
    let mut layer = vec![0f32; width as usize * height as usize];
    let theta = params.streak_angle_deg.to_radians();
    let (sx, sy) = (libm::sinf(theta), libm::cosf(theta));
    let half = params.streak_length_px / 2.0;
    for (x, y) in streak_anchors(width, height, params, seed) {
        let a = (x - sx * half, y - sy * half);
        let b = (x + sx * half, y + sy * half);
        let x0 = (a.0.min(b.0) - 1.0).floor().max(0.0) as u32;
        let x1 = ((a.0.max(b.0) + 1.0).ceil().max(0.0) as u32).min(width);
        let y0 = (a.1.min(b.1) - 1.0).floor().max(0.0) as u32;
        let y1 = ((a.1.max(b.1) + 1.0).ceil().max(0.0) as u32).min(height);
        for py in y0..y1 {
            for px in x0..x1 {
                let d = segment_distance(px as f32 + 0.5, py as f32 + 0.5, a, b);
                let cov = (1.0 - d).max(0.0) * params.streak_alpha;
                let i = py as usize * width as usize + px as usize;
                if cov > layer[i] {
                    layer[i] = cov;
                }
            }
        }
    }
    layer
}

pub fn apply_rain(
    scene: &ScenePacket,
    params: &RainParams,
    seed: u64,
) -> Result<RgbImage, AugmentError> {
    params.validate()?;
    scene.validate()?;
    let mut img = FloatImage::from_rgb(&scene.image);
    if params.wetness > 0.0 {
        let seg = scene
            .segmap
            .as_ref()
            .ok_or(AugmentError::MissingSegmap { kernel: "rain" })?;
        let factor = 1.0 - params.wetness * WET_DARKENING;
        for (px, s) in img.data.iter_mut().zip(seg.as_raw()) {
            if params.road_class_ids.contains(s) {
                *px = px.map(|c| c * factor);
            }
        }
        let mirror = params.reflectivity * params.wetness;
        if mirror > 0.0 {
            let rp = ReflectionParams {
                road_class_ids: params.road_class_ids.clone(),
                reflectivity: mirror,
                blur_sigma: WET_REFLECTION_BLUR,
                attenuation_per_row: WET_REFLECTION_ATTENUATION,
            };
            reflect_in_place(&mut img, seg, &rp);
        }
    }
    if params.streak_density > 0.0 {
        let mut layer = streak_layer(img.width, img.height, params, seed);
        blur_plane(&mut layer, img.width, img.height, params.drop_blur_sigma);
        for (px, a) in img.data.iter_mut().zip(layer) {
            if a > 0.0 {
                *px = px.map(|c| c * (1.0 - a) + STREAK_LEVEL * a);
            }
        }
    }
    Ok(img.to_rgb())
}
