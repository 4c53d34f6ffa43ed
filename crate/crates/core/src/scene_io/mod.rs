//! Multi-channel scene representation and its on-disk formats.
//!
//! A scene `<id>` in a directory is stored as:
//!
//! | file            | content                                          |
//! |-----------------|--------------------------------------------------|
//! | `<id>.png`      | 8-bit RGB image, tEXt chunks carry id and tag     |
//! | `<id>_depth.pfm`| single-channel little-endian PFM, meters          |
//! | `<id>_seg.png`  | 8-bit grayscale class-index raster                |
//! | `<id>.jsonl`    | one box object per line                           |
//!
//! Depth samples `<= 0` mark invalid depth. Box coordinates are continuous,
//! origin top-left, x to the right, y downward.

pub mod pfm;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Cursor, Write};
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub use pfm::{read_pfm, write_pfm, PfmError};

const META_ID: &str = "augforge-id";
const META_CONDITION: &str = "augforge-condition";

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("{what} is {found_w}x{found_h} but the image is {width}x{height}")]
    DimensionMismatch {
        what: &'static str,
        width: u32,
        height: u32,
        found_w: u32,
        found_h: u32,
    },
    #[error("malformed annotation{}: {reason}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    MalformedAnnotation { line: Option<usize>, reason: String },
    #[error("invalid depth at pixel ({x}, {y}): {value}")]
    InvalidDepth { x: u32, y: u32, value: f32 },
    #[error("cannot decode {}: {reason}", .path.display())]
    Decode { path: PathBuf, reason: String },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl SceneError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn decode(path: &Path, reason: impl fmt::Display) -> Self {
        Self::Decode {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }
}

/// Weather or operating condition of a scene.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum ConditionTag {
    #[default]
    Clear,
    Rain,
    Fog,
    Other,
}

impl ConditionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Clear => "clear",
            Self::Rain => "rain",
            Self::Fog => "fog",
            Self::Other => "other",
        }
    }

    pub fn is_adverse(self) -> bool {
        self != Self::Clear
    }
}

impl fmt::Display for ConditionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConditionTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clear" => Ok(Self::Clear),
            "rain" => Ok(Self::Rain),
            "fog" => Ok(Self::Fog),
            "other" => Ok(Self::Other),
            _ => Err(format!(
                "unknown condition tag `{s}` (expected clear|rain|fog|other)"
            )),
        }
    }
}

/// Axis-aligned box with a class id, in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxAnnotation<T = f64> {
    pub class_id: u32,
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Scalar> BoxAnnotation<T> {
    pub fn new(class_id: u32, x_min: T, y_min: T, x_max: T, y_max: T) -> Self {
        Self {
            class_id,
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn area(&self) -> T {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Checks finiteness and strict ordering of both axes.
    pub fn check_geometry(&self) -> Result<(), String> {
        let all = [self.x_min, self.y_min, self.x_max, self.y_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("non-finite coordinate".into());
        }
        if self.x_min >= self.x_max {
            return Err(format!("x_min {} >= x_max {}", self.x_min, self.x_max));
        }
        if self.y_min >= self.y_max {
            return Err(format!("y_min {} >= y_max {}", self.y_min, self.y_max));
        }
        Ok(())
    }

    /// Geometry check plus containment in `[0, width] x [0, height]`.
    pub fn check_within(&self, width: u32, height: u32) -> Result<(), String> {
        self.check_geometry()?;
        let (w, h) = (T::of(width as f64), T::of(height as f64));
        if self.x_min < T::zero() || self.y_min < T::zero() || self.x_max > w || self.y_max > h {
            return Err(format!(
                "box ({}, {}, {}, {}) leaves the {width}x{height} frame",
                self.x_min, self.y_min, self.x_max, self.y_max
            ));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> BoxAnnotation<U> {
        BoxAnnotation {
            class_id: self.class_id,
            x_min: U::of(self.x_min.to_f64_lossy()),
            y_min: U::of(self.y_min.to_f64_lossy()),
            x_max: U::of(self.x_max.to_f64_lossy()),
            y_max: U::of(self.y_max.to_f64_lossy()),
        }
    }
}

/// Per-pixel metric depth, row-major. Samples `<= 0` are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthMap {
    /// Wraps raw samples without validation. Panics if the length does not match.
    pub fn from_raw(width: u32, height: u32, values: Vec<f32>) -> Self {
        assert_eq!(
            values.len(),
            width as usize * height as usize,
            "depth raster size"
        );
        Self {
            width,
            height,
            values,
        }
    }

    pub fn filled(width: u32, height: u32, meters: f32) -> Self {
        Self::from_raw(
            width,
            height,
            vec![meters; width as usize * height as usize],
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Depth at a pixel, or `None` where the sample is the invalid sentinel.
    pub fn valid(&self, x: u32, y: u32) -> Option<f32> {
        let v = self.get(x, y);
        (v > 0.0).then_some(v)
    }

    pub fn flip_horizontal(&self) -> Self {
        let w = self.width as usize;
        let values = self
            .values
            .chunks_exact(w.max(1))
            .flat_map(|row| row.iter().rev().copied())
            .collect();
        Self::from_raw(self.width, self.height, values)
    }
}

/// Image plus optional depth, segmentation and boxes. The unit every
/// augmentation kernel consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePacket {
    pub id: String,
    pub image: RgbImage,
    pub depth: Option<DepthMap>,
    pub segmap: Option<GrayImage>,
    pub annotations: Option<Vec<BoxAnnotation>>,
    pub condition_tag: ConditionTag,
}

impl ScenePacket {
    /// A scene holding only an image.
    pub fn from_image(id: impl Into<String>, image: RgbImage) -> Self {
        Self {
            id: id.into(),
            image,
            depth: None,
            segmap: None,
            annotations: None,
            condition_tag: ConditionTag::Clear,
        }
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let (w, h) = self.image.dimensions();
        if let Some(d) = &self.depth {
            if (d.width, d.height) != (w, h) {
                return Err(SceneError::DimensionMismatch {
                    what: "depth map",
                    width: w,
                    height: h,
                    found_w: d.width,
                    found_h: d.height,
                });
            }
            if let Some(i) = d.values.iter().position(|v| !v.is_finite()) {
                return Err(SceneError::InvalidDepth {
                    x: (i % w as usize) as u32,
                    y: (i / w as usize) as u32,
                    value: d.values[i],
                });
            }
        }
        if let Some(s) = &self.segmap {
            if s.dimensions() != (w, h) {
                return Err(SceneError::DimensionMismatch {
                    what: "segmentation map",
                    width: w,
                    height: h,
                    found_w: s.width(),
                    found_h: s.height(),
                });
            }
        }
        if let Some(boxes) = &self.annotations {
            for (i, b) in boxes.iter().enumerate() {
                b.check_within(w, h)
                    .map_err(|reason| SceneError::MalformedAnnotation {
                        line: Some(i + 1),
                        reason,
                    })?;
            }
        }
        Ok(())
    }
}

/// Locations of the files making up one scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenePaths {
    pub image: PathBuf,
    pub depth: Option<PathBuf>,
    pub segmap: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
}

impl ScenePaths {
    /// Conventional file names for scene `id` under `dir`, whether or not they exist.
    pub fn conventional(dir: &Path, id: &str) -> Self {
        Self {
            image: dir.join(format!("{id}.png")),
            depth: Some(dir.join(format!("{id}_depth.pfm"))),
            segmap: Some(dir.join(format!("{id}_seg.png"))),
            annotations: Some(dir.join(format!("{id}.jsonl"))),
        }
    }

    /// Conventional names, keeping only the optional files that exist.
    pub fn existing(dir: &Path, id: &str) -> Self {
        let mut p = Self::conventional(dir, id);
        p.depth = p.depth.filter(|f| f.is_file());
        p.segmap = p.segmap.filter(|f| f.is_file());
        p.annotations = p.annotations.filter(|f| f.is_file());
        p
    }
}

/// Lists scenes in `dir` by their `<id>.png` image, sorted by id.
pub fn discover_scenes(dir: &Path) -> Result<Vec<ScenePaths>, SceneError> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| SceneError::io(dir, e))? {
        let entry = entry.map_err(|e| SceneError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(stem) = name.strip_suffix(".png") {
            if !stem.ends_with("_seg") {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids.iter().map(|id| ScenePaths::existing(dir, id)).collect())
}

fn read_file(path: &Path) -> Result<Vec<u8>, SceneError> {
    fs::read(path).map_err(|e| SceneError::io(path, e))
}

struct DecodedPng {
    width: u32,
    height: u32,
    color: png::ColorType,
    data: Vec<u8>,
    text: Vec<(String, String)>,
}

fn decode_png(path: &Path, expand_palette: bool) -> Result<DecodedPng, SceneError> {
    let bytes = read_file(path)?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    if expand_palette {
        decoder.set_transformations(png::Transformations::EXPAND);
    }
    let mut reader = decoder
        .read_info()
        .map_err(|e| SceneError::decode(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| SceneError::decode(path, "image too large"))?;
    let mut data = vec![0; size];
    let info = reader
        .next_frame(&mut data)
        .map_err(|e| SceneError::decode(path, e))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(SceneError::decode(
            path,
            format!("expected 8 bits per channel, found {:?}", info.bit_depth),
        ));
    }
    data.truncate(info.buffer_size());
    let text = reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .map(|c| (c.keyword.clone(), c.text.clone()))
        .collect();
    Ok(DecodedPng {
        width: info.width,
        height: info.height,
        color: info.color_type,
        data,
        text,
    })
}

fn encode_png(
    path: &Path,
    width: u32,
    height: u32,
    color: png::ColorType,
    data: &[u8],
    text: &[(&str, &str)],
) -> Result<(), SceneError> {
    let file = File::create(path).map_err(|e| SceneError::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| match e {
        png::EncodingError::IoError(e) => SceneError::io(path, e),
        other => SceneError::io(path, io::Error::other(other)),
    };
    for (k, v) in text {
        enc.add_text_chunk((*k).to_string(), (*v).to_string())
            .map_err(to_io)?;
    }
    let mut writer = enc.write_header().map_err(to_io)?;
    writer.write_image_data(data).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

/// Decodes an 8-bit RGB PNG. Palette images are expanded; other color types are rejected.
pub fn read_rgb_png(path: &Path) -> Result<RgbImage, SceneError> {
    Ok(read_rgb_png_with_text(path)?.0)
}

fn read_rgb_png_with_text(path: &Path) -> Result<(RgbImage, Vec<(String, String)>), SceneError> {
    let png = decode_png(path, true)?;
    if png.color != png::ColorType::Rgb {
        return Err(SceneError::decode(
            path,
            format!("expected RGB image, found {:?}", png.color),
        ));
    }
    let img = RgbImage::from_raw(png.width, png.height, png.data)
        .ok_or_else(|| SceneError::decode(path, "short pixel buffer"))?;
    Ok((img, png.text))
}

/// Decodes a single-channel 8-bit class-index PNG.
pub fn read_segmap_png(path: &Path) -> Result<GrayImage, SceneError> {
    let png = decode_png(path, false)?;
    if png.color != png::ColorType::Grayscale {
        return Err(SceneError::decode(
            path,
            format!(
                "segmentation map must be 8-bit grayscale, found {:?}",
                png.color
            ),
        ));
    }
    GrayImage::from_raw(png.width, png.height, png.data)
        .ok_or_else(|| SceneError::decode(path, "short pixel buffer"))
}

pub fn write_rgb_png(path: &Path, image: &RgbImage) -> Result<(), SceneError> {
    encode_png(
        path,
        image.width(),
        image.height(),
        png::ColorType::Rgb,
        image.as_raw(),
        &[],
    )
}

pub fn write_segmap_png(path: &Path, segmap: &GrayImage) -> Result<(), SceneError> {
    encode_png(
        path,
        segmap.width(),
        segmap.height(),
        png::ColorType::Grayscale,
        segmap.as_raw(),
        &[],
    )
}

pub fn read_depth(path: &Path) -> Result<DepthMap, SceneError> {
    let file = File::open(path).map_err(|e| SceneError::io(path, e))?;
    read_pfm(BufReader::new(file)).map_err(|e| match e {
        PfmError::Io(e) => SceneError::io(path, e),
        other => SceneError::decode(path, other),
    })
}

/// Parses box annotations, one JSON object per line. Blank lines are skipped.
pub fn read_annotations(path: &Path) -> Result<Vec<BoxAnnotation>, SceneError> {
    let file = File::open(path).map_err(|e| SceneError::io(path, e))?;
    let mut boxes = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SceneError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let b: BoxAnnotation =
            serde_json::from_str(&line).map_err(|e| SceneError::MalformedAnnotation {
                line: Some(i + 1),
                reason: e.to_string(),
            })?;
        b.check_geometry()
            .map_err(|reason| SceneError::MalformedAnnotation {
                line: Some(i + 1),
                reason,
            })?;
        boxes.push(b);
    }
    Ok(boxes)
}

pub fn write_annotations(path: &Path, boxes: &[BoxAnnotation]) -> Result<(), SceneError> {
    let file = File::create(path).map_err(|e| SceneError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for b in boxes {
        let line = serde_json::to_string(b).expect("box serializes");
        writeln!(w, "{line}").map_err(|e| SceneError::io(path, e))?;
    }
    w.flush().map_err(|e| SceneError::io(path, e))
}

/// Loads and validates a scene. The id and condition tag come from the
/// image's tEXt chunks when present, otherwise from the file stem and `clear`.
pub fn load_scene(paths: &ScenePaths) -> Result<ScenePacket, SceneError> {
    let (image, text) = read_rgb_png_with_text(&paths.image)?;
    let mut id = paths
        .image
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scene")
        .to_string();
    let mut condition_tag = ConditionTag::Clear;
    for (k, v) in text {
        match k.as_str() {
            META_ID => id = v,
            META_CONDITION => {
                condition_tag = v
                    .parse()
                    .map_err(|e: String| SceneError::decode(&paths.image, e))?;
            }
            _ => {}
        }
    }
    let depth = paths.depth.as_deref().map(read_depth).transpose()?;
    let segmap = paths.segmap.as_deref().map(read_segmap_png).transpose()?;
    let annotations = paths
        .annotations
        .as_deref()
        .map(read_annotations)
        .transpose()?;
    let scene = ScenePacket {
        id,
        image,
        depth,
        segmap,
        annotations,
        condition_tag,
    };
    scene.validate()?;
    Ok(scene)
}

/// Writes every present field under the conventional names and returns the
/// written paths in the order image, depth, segmap, annotations.
pub fn write_scene(scene: &ScenePacket, out_dir: &Path) -> Result<Vec<PathBuf>, SceneError> {
    let paths = ScenePaths::conventional(out_dir, &scene.id);
    let mut written = Vec::with_capacity(4);
    encode_png(
        &paths.image,
        scene.width(),
        scene.height(),
        png::ColorType::Rgb,
        scene.image.as_raw(),
        &[
            (META_ID, &scene.id),
            (META_CONDITION, scene.condition_tag.as_str()),
        ],
    )?;
    written.push(paths.image.clone());
    if let (Some(depth), Some(p)) = (&scene.depth, paths.depth) {
        let file = File::create(&p).map_err(|e| SceneError::io(&p, e))?;
        let mut w = BufWriter::new(file);
        write_pfm(&mut w, depth).map_err(|e| SceneError::io(&p, e))?;
        w.flush().map_err(|e| SceneError::io(&p, e))?;
        written.push(p);
    }
    if let (Some(seg), Some(p)) = (&scene.segmap, paths.segmap) {
        write_segmap_png(&p, seg)?;
        written.push(p);
    }
    if let (Some(boxes), Some(p)) = (&scene.annotations, paths.annotations) {
        write_annotations(&p, boxes)?;
        written.push(p);
    }
    Ok(written)
}

/// Paths of the files `write_scene` produced, as a loadable `ScenePaths`.
pub fn paths_for_written(scene: &ScenePacket, out_dir: &Path) -> ScenePaths {
    let mut p = ScenePaths::conventional(out_dir, &scene.id);
    if scene.depth.is_none() {
        p.depth = None;
    }
    if scene.segmap.is_none() {
        p.segmap = None;
    }
    if scene.annotations.is_none() {
        p.annotations = None;
    }
    p
}
