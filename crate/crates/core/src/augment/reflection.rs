use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use super::raster::{blur_rgb, quantize, FloatImage};
use super::AugmentError;
use crate::scene_io::ScenePacket;

/// Cityscapes label id of `road`.
pub const CITYSCAPES_ROAD: u8 = 7;

/// Planar mirror of the scene about the upper edge of the road, per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflectionParams {
    /// Segmentation classes treated as reflective road surface.
    pub road_class_ids: Vec<u8>,
    /// Blend weight of the reflection at the road edge, `[0, 1]`.
    pub reflectivity: f32,
    /// Gaussian sigma in pixels applied to the reflection layer.
    pub blur_sigma: f32,
    /// Multiplicative weight decay per pixel row below the road edge, `(0, 1]`.
    pub attenuation_per_row: f32,
}

impl Default for ReflectionParams {
    fn default() -> Self {
        Self {
            road_class_ids: vec![CITYSCAPES_ROAD],
            reflectivity: 0.35,
            blur_sigma: 1.5,
            attenuation_per_row: 0.97,
        }
    }
}

impl ReflectionParams {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.road_class_ids.is_empty() {
            return Err(AugmentError::invalid("road_class_ids must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(AugmentError::invalid(format!(
                "reflectivity {} must lie in [0, 1]",
                self.reflectivity
            )));
        }
        if !(self.blur_sigma.is_finite() && self.blur_sigma >= 0.0) {
            return Err(AugmentError::invalid(format!(
                "blur_sigma {} must be >= 0",
                self.blur_sigma
            )));
        }
        if !(self.attenuation_per_row > 0.0 && self.attenuation_per_row <= 1.0) {
            return Err(AugmentError::invalid(format!(
                "attenuation_per_row {} must lie in (0, 1]",
                self.attenuation_per_row
            )));
        }
        Ok(())
    }

    pub(crate) fn set(&mut self, name: &str, v: f64) -> Result<(), AugmentError> {
        let v = v as f32;
        match name {
            "reflectivity" => self.reflectivity = v,
            "blur_sigma" => self.blur_sigma = v,
            "attenuation_per_row" => self.attenuation_per_row = v,
            _ => {
                return Err(AugmentError::UnknownParam {
                    kernel: "wet_reflection",
                    name: name.into(),
                })
            }
        }
        Ok(())
    }
}

/// Per-pixel reflection weight and mirrored color, or `None` for pixels the
/// reflection does not touch. For a column whose topmost road row is `r0`,
/// road pixel `r0 + k` mirrors row `r0 - 1 - k` with weight
/// `reflectivity * attenuation^k`.
pub(crate) fn reflection_plan(
    img: &FloatImage,
    segmap: &GrayImage,
    params: &ReflectionParams,
) -> (Vec<Option<f32>>, FloatImage) {
    let (w, h) = (img.width, img.height);
    let is_road = |x: u32, y: u32| params.road_class_ids.contains(&segmap.get_pixel(x, y)[0]);
    let mut weights = vec![None; img.data.len()];
    let mut layer = img.clone();
    if params.reflectivity == 0.0 {
        return (weights, layer);
    }
    for x in 0..w {
        let Some(r0) = (0..h).find(|&y| is_road(x, y)) else {
            continue;
        };
        let mut decay = 1.0f32;
        for y in r0..h {
            let k = y - r0;
            if k > 0 {
                decay *= params.attenuation_per_row;
            }
            if k + 1 > r0 {
                break;
            }
            if !is_road(x, y) {
                continue;
            }
            let src = img.idx(x, r0 - 1 - k);
            let dst = img.idx(x, y);
            layer.data[dst] = img.data[src];
            weights[dst] = Some(params.reflectivity * decay);
        }
    }
    blur_rgb(&mut layer, params.blur_sigma);
    (weights, layer)
}

/// Blends the mirrored layer into `img` in place.
pub(crate) fn reflect_in_place(
    img: &mut FloatImage,
    segmap: &GrayImage,
    params: &ReflectionParams,
) {
    let (weights, layer) = reflection_plan(img, segmap, params);
    for (i, w) in weights.iter().enumerate() {
        if let Some(w) = *w {
            let (a, b) = (img.data[i], layer.data[i]);
            img.data[i] = [0, 1, 2].map(|c| (1.0 - w) * a[c] + w * b[c]);
        }
    }
}

/// Wet-road reflection. Pixels outside the reflected road area keep their
/// exact input bytes.
pub fn apply_wet_road_reflection(
    scene: &ScenePacket,
    params: &ReflectionParams,
) -> Result<RgbImage, AugmentError> {
    params.validate()?;
    scene.validate()?;
    let segmap = scene.segmap.as_ref().ok_or(AugmentError::MissingSegmap {
        kernel: "wet_reflection",
    })?;
    let img = FloatImage::from_rgb(&scene.image);
    let (weights, layer) = reflection_plan(&img, segmap, params);
    let mut out = scene.image.clone();
    for (i, w) in weights.iter().enumerate() {
        if let Some(w) = *w {
            let (a, b) = (img.data[i], layer.data[i]);
            let x = (i % img.width as usize) as u32;
            let y = (i / img.width as usize) as u32;
            out.put_pixel(
                x,
                y,
                image::Rgb([0, 1, 2].map(|c| quantize((1.0 - w) * a[c] + w * b[c]))),
            );
        }
    }
    Ok(out)
}
