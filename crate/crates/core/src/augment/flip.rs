use image::imageops;

use crate::scene_io::{BoxAnnotation, ScenePacket};

/// Mirrors a box across the vertical center line of a `width`-wide frame.
pub fn flip_box(b: &BoxAnnotation, width: u32) -> BoxAnnotation {
    let w = width as f64;
    BoxAnnotation {
        x_min: w - b.x_max,
        x_max: w - b.x_min,
        ..*b
    }
}

/// Left-right mirror of every raster and every box. Box coordinates pass
/// through `W - x` in f64, so flipping twice restores them exactly whenever
/// the coordinates are representable at the frame's precision (e.g. integer
/// or quarter-pixel values).
pub fn horizontal_flip(scene: &ScenePacket) -> ScenePacket {
    let width = scene.width();
    ScenePacket {
        id: scene.id.clone(),
        image: imageops::flip_horizontal(&scene.image),
        depth: scene.depth.as_ref().map(|d| d.flip_horizontal()),
        segmap: scene.segmap.as_ref().map(imageops::flip_horizontal),
        annotations: scene
            .annotations
            .as_ref()
            .map(|boxes| boxes.iter().map(|b| flip_box(b, width)).collect()),
        condition_tag: scene.condition_tag,
    }
}
