//! Procedural street scenes for tests, benchmarks and smoke runs: sky,
//! buildings, road and a few cars, with matching depth, Cityscapes-style
//! segmentation and car boxes.

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::latent::EmbeddingSet;
use crate::metrics::{Detection, GroundTruth};
use crate::rng::{derive_seed, SeededRng};
use crate::scene_io::{BoxAnnotation, ConditionTag, DepthMap, ScenePacket};

pub const SEG_ROAD: u8 = 7;
pub const SEG_BUILDING: u8 = 11;
pub const SEG_SKY: u8 = 23;
pub const SEG_CAR: u8 = 26;
/// Detection class id used for cars.
pub const CLASS_CAR: u32 = 0;

/// Camera height in meters used to place the road plane.
const CAMERA_HEIGHT: f32 = 1.5;
const FOCAL_PX: f32 = 60.0;

/// One street scene. Sky pixels carry invalid (zero) depth.
pub fn street_scene(id: &str, width: u32, height: u32, seed: u64) -> ScenePacket {
    let mut rng = SeededRng::new(seed);
    let horizon = height * 2 / 5;
    let mut img = RgbImage::new(width, height);
    let mut seg = GrayImage::new(width, height);
    let mut depth = vec![0f32; (width * height) as usize];

    let skyline: Vec<u32> = {
        let mut v = Vec::with_capacity(width as usize);
        let mut x = 0;
        while x < width {
            let run = 4 + rng.below(10) as u32;
            let top = horizon.saturating_sub(2 + rng.below((horizon / 2).max(1) as usize) as u32);
            for _ in x..(x + run).min(width) {
                v.push(top);
            }
            x += run;
        }
        v
    };
    let facade = [
        120 + rng.below(60) as u8,
        110 + rng.below(40) as u8,
        100 + rng.below(40) as u8,
    ];
    let building_depth = 40.0 + rng.next_f64() as f32 * 40.0;

    for y in 0..height {
        for x in 0..width {
            let i = (y * width + x) as usize;
            let (px, class, d) = if y >= horizon {
                let rows = (y - horizon + 1) as f32;
                let d = CAMERA_HEIGHT * FOCAL_PX / rows;
                let g = (70 + (y - horizon) * 40 / (height - horizon).max(1)) as u8;
                let lane = x == width / 2 && y % 6 < 3;
                (
                    if lane { [230, 230, 210] } else { [g, g, g + 5] },
                    SEG_ROAD,
                    d,
                )
            } else if y >= skyline[x as usize] {
                let shade = if (x / 3 + y / 4) % 3 == 0 { 25 } else { 0 };
                (
                    facade.map(|c| c.saturating_sub(shade)),
                    SEG_BUILDING,
                    building_depth,
                )
            } else {
                let t = y as f32 / horizon.max(1) as f32;
                (
                    [(140.0 + 60.0 * t) as u8, (170.0 + 50.0 * t) as u8, 235],
                    SEG_SKY,
                    0.0,
                )
            };
            img.put_pixel(x, y, Rgb(px));
            seg.put_pixel(x, y, Luma([class]));
            depth[i] = d;
        }
    }

    let n_cars = 1 + rng.below(3);
    let mut boxes = Vec::with_capacity(n_cars);
    for _ in 0..n_cars {
        let bottom = horizon + 4 + rng.below((height - horizon - 4).max(1) as usize) as u32;
        let bottom = bottom.min(height);
        let rows = (bottom - horizon) as f32;
        let h = ((rows * 0.8) as u32).clamp(3, bottom);
        let w = ((h as f32 * 1.6) as u32).clamp(4, width);
        let x0 = rng.below((width - w + 1) as usize) as u32;
        let y0 = bottom - h;
        let color = [
            rng.below(200) as u8 + 30,
            rng.below(120) as u8,
            rng.below(120) as u8,
        ];
        let d = CAMERA_HEIGHT * FOCAL_PX / rows.max(1.0);
        for y in y0..bottom {
            for x in x0..x0 + w {
                img.put_pixel(x, y, Rgb(color));
                seg.put_pixel(x, y, Luma([SEG_CAR]));
                depth[(y * width + x) as usize] = d;
            }
        }
        boxes.push(BoxAnnotation::new(
            CLASS_CAR,
            x0 as f64,
            y0 as f64,
            (x0 + w) as f64,
            bottom as f64,
        ));
    }

    ScenePacket {
        id: id.to_string(),
        image: img,
        depth: Some(DepthMap::from_raw(width, height, depth)),
        segmap: Some(seg),
        annotations: Some(boxes),
        condition_tag: ConditionTag::Clear,
    }
}

/// `n` scenes named `scene00`, `scene01`, ...
pub fn street_fixture(n: usize, width: u32, height: u32, seed: u64) -> Vec<ScenePacket> {
    (0..n)
        .map(|i| {
            street_scene(
                &format!("scene{i:02}"),
                width,
                height,
                derive_seed(seed, i as u64),
            )
        })
        .collect()
}

/// Ground truth of every annotated scene.
pub fn ground_truth(scenes: &[ScenePacket]) -> Vec<GroundTruth> {
    scenes
        .iter()
        .flat_map(|s| {
            s.annotations.iter().flatten().map(|b| GroundTruth {
                image_id: s.id.clone(),
                bbox: *b,
            })
        })
        .collect()
}

/// One exact detection per ground-truth box, confidence 1.
pub fn perfect_predictions(scenes: &[ScenePacket]) -> Vec<Detection> {
    ground_truth(scenes)
        .into_iter()
        .map(|g| Detection {
            image_id: g.image_id,
            bbox: g.bbox,
            confidence: 1.0,
        })
        .collect()
}

/// Imperfect detector output: boxes jittered by up to `jitter_px`, roughly
/// one miss in six and one spurious box per scene in three.
pub fn noisy_predictions(scenes: &[ScenePacket], jitter_px: f64, seed: u64) -> Vec<Detection> {
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::new();
    for s in scenes {
        let (w, h) = (s.width() as f64, s.height() as f64);
        for b in s.annotations.iter().flatten() {
            if rng.below(6) == 0 {
                continue;
            }
            let mut j = || (rng.next_f64() * 2.0 - 1.0) * jitter_px;
            let x0 = (b.x_min + j()).clamp(0.0, w - 1.0);
            let y0 = (b.y_min + j()).clamp(0.0, h - 1.0);
            let x1 = (b.x_max + j()).clamp(x0 + 1.0, w);
            let y1 = (b.y_max + j()).clamp(y0 + 1.0, h);
            let conf = 0.5 + 0.5 * rng.next_f64();
            out.push(Detection {
                image_id: s.id.clone(),
                bbox: BoxAnnotation::new(b.class_id, x0, y0, x1, y1),
                confidence: conf,
            });
        }
        if rng.below(3) == 0 {
            let x0 = rng.next_f64() * (w - 8.0);
            let y0 = rng.next_f64() * (h - 8.0);
            out.push(Detection {
                image_id: s.id.clone(),
                bbox: BoxAnnotation::new(CLASS_CAR, x0, y0, x0 + 6.0, y0 + 6.0),
                confidence: 0.6 * rng.next_f64(),
            });
        }
    }
    out
}

/// Two 2-D embedding clusters, `n_each` rows apiece: clear around (-2, 0)
/// and odd around (+2, 0), each coordinate jittered uniformly by up to 0.1.
/// Panics when `n_each` is 0.
pub fn separable_clusters(n_each: usize, seed: u64) -> (EmbeddingSet, EmbeddingSet) {
    let mut rng = SeededRng::new(seed);
    let mut cluster = |cx: f32| {
        let rows = (0..n_each)
            .map(|_| {
                let mut j = || (rng.next_f64() * 0.2 - 0.1) as f32;
                vec![cx + j(), j()]
            })
            .collect();
        EmbeddingSet::from_rows(rows).expect("rows share one dimension")
    };
    let clear = cluster(-2.0);
    let odd = cluster(2.0);
    (clear, odd)
}
