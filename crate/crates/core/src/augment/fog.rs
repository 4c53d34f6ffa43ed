use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::raster::FloatImage;
use super::AugmentError;
use crate::scene_io::ScenePacket;

/// Homogeneous fog following the Koschmieder scattering model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FogParams {
    /// Extinction coefficient, 1/m.
    pub beta: f32,
    /// Atmospheric light, linear RGB in `[0, 1]`.
    pub airlight: [f32; 3],
    /// Distance in meters used where depth is missing or invalid.
    pub depth_fill: f32,
}

impl Default for FogParams {
    fn default() -> Self {
        Self {
            beta: 0.02,
            airlight: [0.85, 0.85, 0.85],
            depth_fill: 100.0,
        }
    }
}

impl FogParams {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(AugmentError::invalid(format!(
                "fog beta {} must be >= 0",
                self.beta
            )));
        }
        if self.airlight.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(AugmentError::invalid(format!(
                "fog airlight {:?} must lie in [0, 1]",
                self.airlight
            )));
        }
        if !(self.depth_fill.is_finite() && self.depth_fill > 0.0) {
            return Err(AugmentError::invalid(format!(
                "fog depth_fill {} must be > 0",
                self.depth_fill
            )));
        }
        Ok(())
    }

    pub(crate) fn set(&mut self, name: &str, v: f64) -> Result<(), AugmentError> {
        let v = v as f32;
        match name {
            "beta" => self.beta = v,
            "airlight" => self.airlight = [v; 3],
            "airlight_r" => self.airlight[0] = v,
            "airlight_g" => self.airlight[1] = v,
            "airlight_b" => self.airlight[2] = v,
            "depth_fill" => self.depth_fill = v,
            _ => {
                return Err(AugmentError::UnknownParam {
                    kernel: "fog",
                    name: name.into(),
                })
            }
        }
        Ok(())
    }
}

/// Transmission `exp(-beta d)`.
#[inline]
pub fn transmission(beta: f32, depth: f32) -> f32 {
    libm::expf(-beta * depth)
}

/// `in * t + airlight * (1 - t)` for one normalized channel.
#[inline]
pub fn fog_channel(input: f32, airlight: f32, t: f32) -> f32 {
    input * t + airlight * (1.0 - t)
}

/// Depth-aware fog over the whole image.
pub fn apply_fog(scene: &ScenePacket, params: &FogParams) -> Result<RgbImage, AugmentError> {
    params.validate()?;
    scene.validate()?;
    let mut img = FloatImage::from_rgb(&scene.image);
    for y in 0..img.height {
        for x in 0..img.width {
            let d = scene
                .depth
                .as_ref()
                .and_then(|d| d.valid(x, y))
                .unwrap_or(params.depth_fill);
            let t = transmission(params.beta, d);
            let i = img.idx(x, y);
            let px = &mut img.data[i];
            for (v, a) in px.iter_mut().zip(params.airlight) {
                *v = fog_channel(*v, a, t);
            }
        }
    }
    Ok(img.to_rgb())
}
