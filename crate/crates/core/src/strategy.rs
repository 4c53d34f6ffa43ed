//! Training manifests: splits, augmented:real ratios, mini-batch groups,
//! loss weights, balanced validation and cross-validation folds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::augment::{sample_unique_specs, AugmentError, AugmentationSpec, KernelParams};
use crate::rng::{derive_seed, SeededRng};
use crate::scene_io::ConditionTag;
use crate::search::ParamSpace;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("invalid ratio: {0}")]
    InvalidRatio(String),
    #[error("ratio infeasible: {0}")]
    InfeasibleRatio(String),
    #[error("{parent} has {found} augmentations, expected {expected}")]
    UnevenAugCount {
        parent: String,
        expected: usize,
        found: usize,
    },
    #[error("alpha {0} must lie strictly between 0 and 1")]
    InvalidAlpha(f64),
    #[error("requested {requested} {kind} ids but only {available} are available")]
    InsufficientData {
        kind: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("{items} items cannot fill {folds} folds")]
    TooFewItems { items: usize, folds: usize },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("manifest json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Real,
    Augmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// A real image available to the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRef {
    pub id: String,
    pub image_ref: String,
    #[serde(default = "clear_tag")]
    pub condition_tag: ConditionTag,
}

fn clear_tag() -> ConditionTag {
    ConditionTag::Clear
}

impl SceneRef {
    pub fn new(id: impl Into<String>, condition_tag: ConditionTag) -> Self {
        let id = id.into();
        Self {
            image_ref: format!("{id}.png"),
            id,
            condition_tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub entry_id: String,
    pub image_ref: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    pub loss_weight: f64,
    pub split: Split,
    pub condition_tag: ConditionTag,
}

impl ManifestEntry {
    pub fn real(scene: &SceneRef, split: Split) -> Self {
        Self {
            entry_id: scene.id.clone(),
            image_ref: scene.image_ref.clone(),
            role: Role::Real,
            parent_id: None,
            spec_ref: None,
            group_id: None,
            loss_weight: 1.0,
            split,
            condition_tag: scene.condition_tag,
        }
    }
}

/// Declared `real:augmented` proportion, written `"r:a"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub real: u32,
    pub aug: u32,
}

impl Ratio {
    pub fn new(real: u32, aug: u32) -> Self {
        Self { real, aug }
    }

    /// `real * aug_count == aug * real_count`.
    pub fn satisfied_by(&self, real_count: usize, aug_count: usize) -> bool {
        real_count as u128 * self.aug as u128 == aug_count as u128 * self.real as u128
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.real, self.aug)
    }
}

impl FromStr for Ratio {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StrategyError::InvalidRatio(format!("{s:?} is not of the form r:a"));
        let (r, a) = s.split_once(':').ok_or_else(bad)?;
        let real = r.trim().parse().map_err(|_| bad())?;
        let aug = a.trim().parse().map_err(|_| bad())?;
        if real == 0 {
            return Err(StrategyError::InvalidRatio(
                "real component must be positive".into(),
            ));
        }
        Ok(Self { real, aug })
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub ratio: Ratio,
    pub k_augs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub seed: u64,
    /// Augmentation specs referenced by `spec_ref`.
    #[serde(default)]
    pub specs: BTreeMap<String, AugmentationSpec>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Real entries only, ratio `1:0`.
    pub fn from_split(scenes: &[SceneRef], assignment: &SplitAssignment, seed: u64) -> Self {
        let entries = scenes
            .iter()
            .filter_map(|s| {
                assignment
                    .get(&s.id)
                    .map(|split| ManifestEntry::real(s, split))
            })
            .collect();
        Self {
            version: MANIFEST_VERSION,
            ratio: Ratio::new(1, 0),
            k_augs: 0,
            alpha: None,
            seed,
            specs: BTreeMap::new(),
            entries,
        }
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split, role: Role) -> usize {
        self.entries_in(split).filter(|e| e.role == role).count()
    }

    /// Checks every structural invariant of the manifest.
    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: String| Err(StrategyError::InvalidManifest(m));
        if self.version != MANIFEST_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        let mut by_id: HashMap<&str, &ManifestEntry> = HashMap::new();
        for e in &self.entries {
            if by_id.insert(&e.entry_id, e).is_some() {
                return Err(StrategyError::DuplicateId(e.entry_id.clone()));
            }
            if !(e.loss_weight > 0.0 && e.loss_weight.is_finite()) {
                return bad(format!("{} has loss weight {}", e.entry_id, e.loss_weight));
            }
        }
        for e in &self.entries {
            match (e.role, &e.parent_id) {
                (Role::Real, None) => {}
                (Role::Real, Some(_)) => {
                    return bad(format!("real entry {} has a parent", e.entry_id))
                }
                (Role::Augmented, None) => {
                    return bad(format!("augmented entry {} has no parent", e.entry_id))
                }
                (Role::Augmented, Some(p)) => match by_id.get(p.as_str()) {
                    Some(parent) if parent.role == Role::Real && parent.split == Split::Train => {
                        if e.split != Split::Train {
                            return bad(format!("augmented entry {} is outside train", e.entry_id));
                        }
                    }
                    _ => {
                        return bad(format!(
                            "parent {p} of {} is not a real train entry",
                            e.entry_id
                        ))
                    }
                },
            }
            if let Some(s) = &e.spec_ref {
                if !self.specs.contains_key(s) {
                    return bad(format!("{} references unknown spec {s}", e.entry_id));
                }
            }
        }
        let (r, a) = (
            self.count(Split::Train, Role::Real),
            self.count(Split::Train, Role::Augmented),
        );
        if !self.ratio.satisfied_by(r, a) {
            return bad(format!(
                "{r} real and {a} augmented train entries do not realize {}",
                self.ratio
            ));
        }
        let mut groups: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
        for e in self.entries_in(Split::Train) {
            if let Some(g) = &e.group_id {
                groups.entry(g).or_default().push(e);
            }
        }
        if !groups.is_empty() {
            if self.entries_in(Split::Train).any(|e| e.group_id.is_none()) {
                return bad("grouped manifest has ungrouped train entries".into());
            }
            for (g, members) in groups {
                let parents: Vec<_> = members.iter().filter(|e| e.role == Role::Real).collect();
                if parents.len() != 1 || members.len() != self.k_augs + 1 {
                    return bad(format!(
                        "group {g} is not one parent plus {} children",
                        self.k_augs
                    ));
                }
                let pid = &parents[0].entry_id;
                if members
                    .iter()
                    .any(|e| e.role == Role::Augmented && e.parent_id.as_ref() != Some(pid))
                {
                    return bad(format!("group {g} mixes parents"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, StrategyError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn read(path: &Path) -> Result<Self, StrategyError> {
        let text = fs::read_to_string(path).map_err(|source| StrategyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let m: Self = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), StrategyError> {
        fs::write(path, self.to_json()?).map_err(|source| StrategyError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Fractions {
    pub fn new(train: f64, val: f64, test: f64) -> Self {
        Self { train, val, test }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(StrategyError::InvalidFractions(format!(
                "{all:?} must be finite and >= 0"
            )));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(StrategyError::InvalidFractions(format!(
                "{all:?} must sum to 1"
            )));
        }
        Ok(())
    }
}

/// Split per id, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment(pub Vec<(String, Split)>);

impl SplitAssignment {
    pub fn get(&self, id: &str) -> Option<Split> {
        self.0.iter().find(|(i, _)| i == id).map(|(_, s)| *s)
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.0
            .iter()
            .filter(move |(_, s)| *s == split)
            .map(|(i, _)| i.as_str())
    }
}

/// Stratified by condition tag: within each tag the ids are shuffled with a
/// seed derived from `seed` and the tag, then the first
/// `round(n * train)` go to train, the next `round(n * val)` (capped) to
/// val, and the rest to test.
pub fn split_dataset(
    items: &[(String, ConditionTag)],
    fractions: Fractions,
    seed: u64,
) -> Result<SplitAssignment, StrategyError> {
    fractions.validate()?;
    if items.is_empty() {
        return Err(StrategyError::EmptyDataset);
    }
    let mut seen = BTreeSet::new();
    let mut strata: BTreeMap<ConditionTag, Vec<usize>> = BTreeMap::new();
    for (i, (id, tag)) in items.iter().enumerate() {
        if !seen.insert(id.as_str()) {
            return Err(StrategyError::DuplicateId(id.clone()));
        }
        strata.entry(*tag).or_default().push(i);
    }
    let mut assigned = vec![Split::Test; items.len()];
    for (tag, mut idx) in strata {
        let mut rng = SeededRng::new(derive_seed(seed, tag as u64));
        rng.shuffle(&mut idx);
        let n = idx.len();
        let n_train = ((n as f64 * fractions.train).round() as usize).min(n);
        let n_val = ((n as f64 * fractions.val).round() as usize).min(n - n_train);
        for (pos, i) in idx.into_iter().enumerate() {
            assigned[i] = if pos < n_train {
                Split::Train
            } else if pos < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Ok(SplitAssignment(
        items
            .iter()
            .zip(assigned)
            .map(|((id, _), s)| (id.clone(), s))
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioPlan<'a> {
    pub ratio: Ratio,
    pub kernel: &'a KernelParams,
    pub space: &'a ParamSpace,
    pub seed: u64,
    /// When set, each augmented spec is independently prefixed by an
    /// horizontal flip with this probability.
    pub flip_probability: Option<f64>,
}

/// Builds a train manifest whose augmented:real counts match `plan.ratio`
/// exactly. With `n` real images the augmented total is `n * a / r`; each
/// image receives `floor(total / n)` specs and the remainder goes one each
/// to the first images of a seeded shuffle. Specs for image `i` are drawn
/// with seed `derive_seed(seed, i)`.
pub fn build_ratio_manifest(
    train: &[SceneRef],
    plan: &RatioPlan<'_>,
) -> Result<DatasetManifest, StrategyError> {
    if train.is_empty() {
        return Err(StrategyError::EmptyDataset);
    }
    let Ratio { real: r, aug: a } = plan.ratio;
    if r == 0 || a == 0 {
        return Err(StrategyError::InvalidRatio(format!(
            "{} needs positive components",
            plan.ratio
        )));
    }
    if let Some(p) = plan.flip_probability {
        if !(0.0..=1.0).contains(&p) {
            return Err(StrategyError::InvalidRatio(format!(
                "flip probability {p} outside [0, 1]"
            )));
        }
    }
    let n = train.len() as u128;
    if !(n * a as u128).is_multiple_of(r as u128) {
        return Err(StrategyError::InfeasibleRatio(format!(
            "{n} real images cannot realize {} exactly",
            plan.ratio
        )));
    }
    let total = (n * a as u128 / r as u128) as usize;
    let base = total / train.len();
    let extra = total % train.len();
    let mut per_image = vec![base; train.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    SeededRng::new(derive_seed(plan.seed, u64::MAX)).shuffle(&mut order);
    for &i in order.iter().take(extra) {
        per_image[i] += 1;
    }

    let mut seen = BTreeSet::new();
    let mut flip_rng = SeededRng::new(derive_seed(plan.seed, u64::MAX - 1));
    let mut specs = BTreeMap::new();
    let mut entries = Vec::with_capacity(train.len() + total);
    for (i, scene) in train.iter().enumerate() {
        if !seen.insert(scene.id.as_str()) {
            return Err(StrategyError::DuplicateId(scene.id.clone()));
        }
        entries.push(ManifestEntry::real(scene, Split::Train));
        if per_image[i] == 0 {
            continue;
        }
        let drawn = sample_unique_specs(plan.kernel, plan.space, per_image[i], derive_seed(plan.seed, i as u64))
            .map_err(|e| match e {
                AugmentError::SpaceTooSmall { requested, available } => StrategyError::InfeasibleRatio(format!(
                    "{} needs {requested} distinct augmentations per image but the space yields {available}",
                    plan.ratio
                )),
                other => other.into(),
            })?;
        for (j, (_, spec)) in drawn.into_iter().enumerate() {
            let spec = match plan.flip_probability {
                Some(p) if flip_rng.next_f64() < p => {
                    let seed = spec.seed;
                    AugmentationSpec::composite(vec![AugmentationSpec::hflip(), spec], seed)
                }
                _ => spec,
            };
            let id = format!("{}_aug{j}", scene.id);
            entries.push(ManifestEntry {
                entry_id: id.clone(),
                image_ref: format!("{id}.png"),
                role: Role::Augmented,
                parent_id: Some(scene.id.clone()),
                spec_ref: Some(id.clone()),
                group_id: None,
                loss_weight: 1.0,
                split: Split::Train,
                condition_tag: spec.resulting_tag(scene.condition_tag),
            });
            specs.insert(id, spec);
        }
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        ratio: plan.ratio,
        k_augs: per_image.iter().copied().max().unwrap_or(0),
        alpha: None,
        seed: plan.seed,
        specs,
        entries,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Adds non-train entries (e.g. val/test real images) to a manifest.
pub fn with_entries(
    mut manifest: DatasetManifest,
    scenes: &[SceneRef],
    split: Split,
) -> Result<DatasetManifest, StrategyError> {
    manifest
        .entries
        .extend(scenes.iter().map(|s| ManifestEntry::real(s, split)));
    manifest.validate()?;
    Ok(manifest)
}

/// Assigns `group_id = "g<parent index>"` to each real train image and its
/// `k` augmentations.
pub fn build_minibatch_groups(
    manifest: &DatasetManifest,
    k: usize,
) -> Result<DatasetManifest, StrategyError> {
    let mut children: HashMap<&str, usize> = HashMap::new();
    for e in manifest
        .entries_in(Split::Train)
        .filter(|e| e.role == Role::Augmented)
    {
        let p = e.parent_id.as_deref().ok_or_else(|| {
            StrategyError::InvalidManifest(format!("augmented entry {} has no parent", e.entry_id))
        })?;
        *children.entry(p).or_default() += 1;
    }
    let mut group_of: HashMap<String, String> = HashMap::new();
    for (gi, e) in manifest
        .entries_in(Split::Train)
        .filter(|e| e.role == Role::Real)
        .enumerate()
    {
        let found = children.remove(e.entry_id.as_str()).unwrap_or(0);
        if found != k {
            return Err(StrategyError::UnevenAugCount {
                parent: e.entry_id.clone(),
                expected: k,
                found,
            });
        }
        group_of.insert(e.entry_id.clone(), format!("g{gi}"));
    }
    if let Some((orphan_parent, _)) = children.into_iter().next() {
        return Err(StrategyError::InvalidManifest(format!(
            "augmentations reference {orphan_parent}, which is not a real train entry"
        )));
    }
    let mut out = manifest.clone();
    out.k_augs = k;
    for e in out.entries.iter_mut().filter(|e| e.split == Split::Train) {
        let key = match e.role {
            Role::Real => &e.entry_id,
            Role::Augmented => e.parent_id.as_ref().expect("checked above"),
        };
        e.group_id = group_of.get(key).cloned();
    }
    Ok(out)
}

/// Augmented and adverse-condition entries get `alpha`, clear real entries
/// `1 - alpha`.
pub fn assign_loss_weights(
    manifest: &DatasetManifest,
    alpha: f64,
) -> Result<DatasetManifest, StrategyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StrategyError::InvalidAlpha(alpha));
    }
    let mut out = manifest.clone();
    out.alpha = Some(alpha);
    for e in &mut out.entries {
        e.loss_weight = if e.role == Role::Augmented || e.condition_tag.is_adverse() {
            alpha
        } else {
            1.0 - alpha
        };
    }
    Ok(out)
}

/// Replaces the val split with `n_each` seeded picks from each pool. Ids
/// already in train or test are never picked.
pub fn balanced_validation(
    manifest: &DatasetManifest,
    clear: &[SceneRef],
    adverse: &[SceneRef],
    n_each: usize,
    seed: u64,
) -> Result<DatasetManifest, StrategyError> {
    let taken: HashMap<&str, Split> = manifest
        .entries
        .iter()
        .filter(|e| e.split != Split::Val)
        .map(|e| (e.entry_id.as_str(), e.split))
        .collect();
    fn pick<'p>(
        pool: &'p [SceneRef],
        taken: &HashMap<&str, Split>,
        n_each: usize,
        kind: &'static str,
        seed: u64,
    ) -> Result<Vec<&'p SceneRef>, StrategyError> {
        let mut dedup = BTreeSet::new();
        let mut avail: Vec<&SceneRef> = pool
            .iter()
            .filter(|s| !taken.contains_key(s.id.as_str()) && dedup.insert(s.id.as_str()))
            .collect();
        if avail.len() < n_each {
            return Err(StrategyError::InsufficientData {
                kind,
                requested: n_each,
                available: avail.len(),
            });
        }
        SeededRng::new(seed).shuffle(&mut avail);
        avail.truncate(n_each);
        Ok(avail)
    }
    let c = pick(clear, &taken, n_each, "clear", derive_seed(seed, 0))?;
    let a = pick(adverse, &taken, n_each, "adverse", derive_seed(seed, 1))?;
    if let Some(dup) = c.iter().find(|s| a.iter().any(|t| t.id == s.id)) {
        return Err(StrategyError::DuplicateId(dup.id.clone()));
    }
    let mut out = manifest.clone();
    out.entries.retain(|e| e.split != Split::Val);
    for s in c.into_iter().chain(a) {
        let mut e = ManifestEntry::real(s, Split::Val);
        if let Some(alpha) = out.alpha {
            e.loss_weight = if s.condition_tag.is_adverse() {
                alpha
            } else {
                1.0 - alpha
            };
        }
        out.entries.push(e);
    }
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<String>,
    pub holdout: Vec<String>,
}

/// Shuffles `ids` with `seed` and deals them round-robin into `k` holdouts.
/// Each id list keeps input order.
pub fn cv_folds(ids: &[String], k: usize, seed: u64) -> Result<Vec<Fold>, StrategyError> {
    if k < 2 || ids.len() < k {
        return Err(StrategyError::TooFewItems {
            items: ids.len(),
            folds: k.max(2),
        });
    }
    let mut seen = BTreeSet::new();
    if let Some(d) = ids.iter().find(|i| !seen.insert(i.as_str())) {
        return Err(StrategyError::DuplicateId(d.clone()));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let mut fold_of = vec![0; ids.len()];
    for (pos, i) in order.into_iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (holdout, train) = ids
                .iter()
                .zip(&fold_of)
                .partition::<Vec<_>, _>(|(_, g)| **g == f);
            Fold {
                index: f,
                train: train.into_iter().map(|(i, _)| i.clone()).collect(),
                holdout: holdout.into_iter().map(|(i, _)| i.clone()).collect(),
            }
        })
        .collect())
}

/// Folds over the train split of a manifest. Real train images are dealt
/// into folds; each augmented entry follows its parent.
pub fn cv_folds_manifest(
    manifest: &DatasetManifest,
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, StrategyError> {
    let parents: Vec<String> = manifest
        .entries_in(Split::Train)
        .filter(|e| e.role == Role::Real)
        .map(|e| e.entry_id.clone())
        .collect();
    let folds = cv_folds(&parents, k, seed)?;
    let mut fold_of: HashMap<&str, usize> = HashMap::new();
    for f in &folds {
        for id in &f.holdout {
            fold_of.insert(id, f.index);
        }
    }
    let mut out: Vec<Fold> = (0..k)
        .map(|index| Fold {
            index,
            train: vec![],
            holdout: vec![],
        })
        .collect();
    for e in manifest.entries_in(Split::Train) {
        let owner = match e.role {
            Role::Real => e.entry_id.as_str(),
            Role::Augmented => e.parent_id.as_deref().unwrap_or_default(),
        };
        let f = *fold_of.get(owner).ok_or_else(|| {
            StrategyError::InvalidManifest(format!("{} has no real train parent", e.entry_id))
        })?;
        for fold in &mut out {
            let list = if fold.index == f {
                &mut fold.holdout
            } else {
                &mut fold.train
            };
            list.push(e.entry_id.clone());
        }
    }
    Ok(out)
}
