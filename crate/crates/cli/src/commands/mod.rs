//! Subcommand implementations and the helpers they share.

pub mod augment;
pub mod eval;
pub mod fixture;
pub mod latent;
pub mod report;
pub mod search;
pub mod strategy;

use std::fs;
use std::path::{Path, PathBuf};

use augforge::augment::{AugmentError, AugmentationSpec, KernelParams};
use augforge::experiment::{record_run, RunResult};
use augforge::metrics::MetricSet;
use augforge::scene_io::{discover_scenes, load_scene, ScenePacket};
use augforge::search::{ParamSpace, ParamVector};
use augforge::strategy::SceneRef;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cli::{KernelArgs, LedgerArgs, SceneSource};
use crate::error::{CliError, CliResult};
use crate::output::Output;

/// Global settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Ctx {
    pub fn out_or(&self, out: &Option<PathBuf>) -> PathBuf {
        out.clone().unwrap_or_else(|| self.out_dir.clone())
    }

    pub fn file_or(&self, out: &Option<PathBuf>, name: &str) -> PathBuf {
        out.clone().unwrap_or_else(|| self.out_dir.join(name))
    }
}

pub type CmdResult = CliResult<Output>;

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn create_parent(file: &Path) -> CliResult<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::invalid(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    write_text(path, &s)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).expect("row serializes"));
        s.push('\n');
    }
    write_text(path, &s)
}

/// Maps `f` over `items` on the current pool. Results keep input order and
/// the first failure in input order is returned.
pub fn par_map<T, R, F>(items: &[T], f: F) -> CliResult<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> CliResult<R> + Sync + Send,
{
    let results: Vec<CliResult<R>> = items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    results.into_iter().collect()
}

/// Scene directory contents sorted by id.
pub fn load_scene_dir(dir: &Path) -> CliResult<Vec<ScenePacket>> {
    if !dir.is_dir() {
        return Err(CliError::Io(format!("{}: not a directory", dir.display())));
    }
    let paths = discover_scenes(dir)?;
    if paths.is_empty() {
        return Err(CliError::invalid(format!(
            "{}: no <id>.png scenes found",
            dir.display()
        )));
    }
    par_map(&paths, |_, p| {
        load_scene(p).map_err(|e| CliError::from(e).context(p.image.display()))
    })
}

/// Scene refs from a directory (tags read from the images) or a JSON list.
pub fn scene_refs(path: &Path) -> CliResult<Vec<SceneRef>> {
    if path.is_dir() {
        Ok(load_scene_dir(path)?
            .into_iter()
            .map(|s| SceneRef {
                image_ref: format!("{}.png", s.id),
                id: s.id,
                condition_tag: s.condition_tag,
            })
            .collect())
    } else {
        read_json(path)
    }
}

impl SceneSource {
    pub fn require(&self) -> CliResult<&Path> {
        self.input
            .as_deref()
            .or(self.scenes.as_deref())
            .ok_or_else(|| CliError::invalid("one of --in or --scenes is required"))
    }
}

pub fn read_space(path: &Path) -> CliResult<ParamSpace> {
    let space: ParamSpace = read_json(path)?;
    space
        .validate()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    Ok(space)
}

const FLAG_PARAMS: [(&str, &str); 12] = [
    ("beta", "beta"),
    ("airlight", "airlight"),
    ("depth-fill", "depth_fill"),
    ("streak-density", "streak_density"),
    ("streak-length", "streak_length_px"),
    ("streak-angle", "streak_angle_deg"),
    ("streak-alpha", "streak_alpha"),
    ("drop-blur", "drop_blur_sigma"),
    ("wetness", "wetness"),
    ("reflectivity", "reflectivity"),
    ("blur-sigma", "blur_sigma"),
    ("attenuation", "attenuation_per_row"),
];

impl KernelArgs {
    fn values(&self) -> [Option<f32>; 12] {
        [
            self.beta,
            self.airlight,
            self.depth_fill,
            self.streak_density,
            self.streak_length,
            self.streak_angle,
            self.streak_alpha,
            self.drop_blur,
            self.wetness,
            self.reflectivity,
            self.blur_sigma,
            self.attenuation,
        ]
    }

    fn any_param_flag(&self) -> bool {
        self.values().iter().any(Option::is_some) || !self.road_class.is_empty()
    }

    /// Kernel parameters from `--kernel` and the parameter flags, validated
    /// without touching the filesystem. `None` when `--spec` is used.
    pub fn flag_params(&self) -> CliResult<Option<KernelParams>> {
        if self.spec.is_some() {
            if self.any_param_flag() {
                return Err(CliError::flag(
                    "spec",
                    "cannot be combined with kernel parameter flags",
                ));
            }
            return Ok(None);
        }
        let kernel = self
            .kernel
            .ok_or_else(|| CliError::invalid("one of --kernel or --spec is required"))?;
        let base = KernelParams::default_for(kernel.as_str())?;
        let mut point = ParamVector::default();
        for ((flag, name), v) in FLAG_PARAMS.iter().zip(self.values()) {
            if let Some(v) = v {
                let one = ParamVector(vec![(name.to_string(), v as f64)]);
                if let Err(AugmentError::UnknownParam { .. }) = base.with_point(&one) {
                    return Err(CliError::flag(
                        flag,
                        format!("does not apply to kernel {}", kernel.as_str()),
                    ));
                }
                point.0.push((name.to_string(), v as f64));
            }
        }
        let mut params = base.with_point(&point)?;
        if !self.road_class.is_empty() {
            match &mut params {
                KernelParams::Rain(p) => p.road_class_ids = self.road_class.clone(),
                KernelParams::WetReflection(p) => p.road_class_ids = self.road_class.clone(),
                _ => {
                    return Err(CliError::flag(
                        "road-class",
                        format!("does not apply to kernel {}", kernel.as_str()),
                    ))
                }
            }
        }
        if let Err(e) = params.validate() {
            // defaults are valid, so a flag that fails on its own is the culprit
            for ((flag, name), v) in FLAG_PARAMS.iter().zip(self.values()) {
                let Some(v) = v else { continue };
                let one = ParamVector(vec![(name.to_string(), v as f64)]);
                if let Err(e) = base.with_point(&one).and_then(|p| p.validate()) {
                    return Err(CliError::flag(flag, e));
                }
            }
            return Err(CliError::invalid(format!("kernel parameters: {e}")));
        }
        Ok(Some(params))
    }

    /// The spec file's content or the flag parameters with `seed`.
    pub fn resolve(&self, flag: Option<KernelParams>, seed: u64) -> CliResult<AugmentationSpec> {
        match (flag, &self.spec) {
            (Some(p), _) => Ok(AugmentationSpec::new(p, seed)),
            (None, Some(path)) => {
                let spec: AugmentationSpec = read_json(path)?;
                spec.params
                    .validate()
                    .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
                Ok(spec)
            }
            (None, None) => Err(CliError::invalid("one of --kernel or --spec is required")),
        }
    }
}

impl LedgerArgs {
    /// Checks the flags and returns the factor levels.
    pub fn validate(&self) -> CliResult<Vec<(String, String)>> {
        let factors = self
            .factors
            .iter()
            .map(|f| {
                f.split_once('=')
                    .filter(|(n, l)| !n.is_empty() && !l.is_empty())
                    .map(|(n, l)| (n.to_string(), l.to_string()))
                    .ok_or_else(|| CliError::flag("factor", format!("{f:?} is not name=level")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        if self.ledger.is_some() && self.run_id.is_none() && factors.is_empty() {
            return Err(CliError::flag(
                "ledger",
                "needs --run-id or at least one --factor",
            ));
        }
        if let Some(t) = &self.timestamp {
            humantime::parse_rfc3339_weak(t).map_err(|e| CliError::flag("timestamp", e))?;
        }
        Ok(factors)
    }

    /// Appends the metrics when `--ledger` is set; returns the record.
    pub fn record(
        &self,
        factors: Vec<(String, String)>,
        metrics: MetricSet<f64>,
    ) -> CliResult<Option<RunResult>> {
        let Some(path) = &self.ledger else {
            return Ok(None);
        };
        let run_id = self.run_id.clone().unwrap_or_else(|| {
            factors
                .iter()
                .map(|(n, l)| format!("{n}={l}"))
                .collect::<Vec<_>>()
                .join(",")
        });
        let mut r = RunResult::new(run_id, metrics);
        r.factor_levels = factors.into_iter().collect();
        r.fold_index = self.fold;
        r.test_set = self.test_set.clone();
        r.timestamp = self.timestamp.clone().unwrap_or_else(|| {
            humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string()
        });
        create_parent(path)?;
        record_run(path, &r).map_err(|e| CliError::from(e).context(path.display()))?;
        Ok(Some(r))
    }
}
