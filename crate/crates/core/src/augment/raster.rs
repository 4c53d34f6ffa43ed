//! Float working buffers, quantization and a deterministic Gaussian blur.

use image::RgbImage;

/// RGB image in normalized `[0, 1]` 32-bit floats, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f32; 3]>,
}

impl FloatImage {
    pub fn from_rgb(img: &RgbImage) -> Self {
        let data = img
            .pixels()
            .map(|p| {
                [
                    p[0] as f32 / 255.0,
                    p[1] as f32 / 255.0,
                    p[2] as f32 / 255.0,
                ]
            })
            .collect();
        Self {
            width: img.width(),
            height: img.height(),
            data,
        }
    }

    #[inline]
    pub fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn to_rgb(&self) -> RgbImage {
        let raw = self.data.iter().flat_map(|px| px.map(quantize)).collect();
        RgbImage::from_raw(self.width, self.height, raw).expect("buffer matches dimensions")
    }
}

/// Clamp to `[0, 1]`, scale to 255 and round half to even.
#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| libm::expf(-((i * i) as f32) / denom))
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur of a single-channel plane with clamp-to-edge
/// borders. The kernel spans `ceil(3 sigma)` pixels each side. `sigma <= 0`
/// leaves the plane untouched.
pub fn blur_plane(plane: &mut [f32], width: u32, height: u32, sigma: f32) {
    if sigma <= 0.0 || plane.is_empty() {
        return;
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (width as i64, height as i64);
    let mut tmp = vec![0f32; plane.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f32;
            for (j, kv) in k.iter().enumerate() {
                let sx = (x + j as i64 - r).clamp(0, w - 1);
                acc += kv * plane[(y * w + sx) as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f32;
            for (j, kv) in k.iter().enumerate() {
                let sy = (y + j as i64 - r).clamp(0, h - 1);
                acc += kv * tmp[(sy * w + x) as usize];
            }
            plane[(y * w + x) as usize] = acc;
        }
    }
}

/// Blurs each channel of an RGB float image independently.
pub fn blur_rgb(img: &mut FloatImage, sigma: f32) {
    if sigma <= 0.0 {
        return;
    }
    for c in 0..3 {
        let mut plane: Vec<f32> = img.data.iter().map(|p| p[c]).collect();
        blur_plane(&mut plane, img.width, img.height, sigma);
        for (p, v) in img.data.iter_mut().zip(plane) {
            p[c] = v;
        }
    }
}
