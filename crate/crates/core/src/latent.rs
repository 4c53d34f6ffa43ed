//! Logistic-regression probe over externally exported feature embeddings.
//!
//! Embedding files are `N` and `D` as little-endian `u32`, followed by
//! `N * D` little-endian `f32` values in row-major order. An optional
//! sidecar `<file>.ids` holds one source id per line.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::search::ParamVector;

#[derive(Debug, Error)]
pub enum LatentError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding set is empty")]
    Empty,
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("no embeddings registered for parameter key {key}")]
    MissingEmbeddings { key: String },
    #[error("malformed embedding file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("classifier json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LatentError + '_ {
    move |source| LatentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `N x D` matrix of feature vectors with per-row source ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    vectors: Vec<f32>,
    pub labels: Option<Vec<u8>>,
    pub source_ids: Vec<String>,
}

impl EmbeddingSet {
    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<Self, LatentError> {
        let dim = rows.first().ok_or(LatentError::Empty)?.len();
        if dim == 0 {
            return Err(LatentError::Empty);
        }
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(LatentError::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            vectors.extend_from_slice(r);
        }
        let source_ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Ok(Self {
            dim,
            vectors,
            labels: None,
            source_ids,
        })
    }

    pub fn with_labels(mut self, label: u8) -> Self {
        self.labels = Some(vec![label; self.len()]);
        self
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.vectors.chunks_exact(self.dim)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.vectors.len() * 4);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.vectors {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, LatentError> {
        let bad = |reason: String| LatentError::Malformed {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < 8 {
            return Err(bad("header shorter than 8 bytes".into()));
        }
        let n = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if n == 0 || d == 0 {
            return Err(bad(format!("header declares {n} x {d}")));
        }
        let expected = n
            .checked_mul(d)
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| bad("size overflow".into()))?;
        if bytes.len() - 8 != expected {
            return Err(bad(format!(
                "expected {expected} payload bytes, found {}",
                bytes.len() - 8
            )));
        }
        let vectors: Vec<f32> = bytes[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(bad(format!(
                "non-finite value at row {} col {}",
                i / d,
                i % d
            )));
        }
        let source_ids = (0..n).map(|i| i.to_string()).collect();
        Ok(Self {
            dim: d,
            vectors,
            labels: None,
            source_ids,
        })
    }

    pub fn read(path: &Path) -> Result<Self, LatentError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        let mut set = Self::from_bytes(&bytes, path)?;
        let ids_path = ids_sidecar(path);
        if ids_path.exists() {
            let text = fs::read_to_string(&ids_path).map_err(io_err(&ids_path))?;
            let ids: Vec<String> = text.lines().map(str::to_owned).collect();
            if ids.len() != set.len() {
                return Err(LatentError::Malformed {
                    path: ids_path,
                    reason: format!("{} ids for {} rows", ids.len(), set.len()),
                });
            }
            set.source_ids = ids;
        }
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<(), LatentError> {
        fs::write(path, self.to_bytes()).map_err(io_err(path))?;
        if self
            .source_ids
            .iter()
            .enumerate()
            .any(|(i, s)| *s != i.to_string())
        {
            let ids_path = ids_sidecar(path);
            let mut text = self.source_ids.join("\n");
            text.push('\n');
            fs::write(&ids_path, text).map_err(io_err(&ids_path))?;
        }
        Ok(())
    }
}

fn ids_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub l2: f64,
    pub tol: f64,
    /// Reserved for shuffling; full-batch descent from zero init uses no randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_iters: 1000,
            l2: 1e-3,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta<T = f64> {
    pub iterations: usize,
    pub final_loss: T,
    pub learning_rate: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier<T = f64> {
    pub weights: Vec<T>,
    pub bias: T,
    pub training_meta: TrainingMeta<T>,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl<T: Scalar> LinearClassifier<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![T::zero(); dim],
            bias: T::zero(),
            training_meta: TrainingMeta {
                iterations: 0,
                final_loss: T::zero(),
                learning_rate: T::zero(),
            },
        }
    }

    pub fn logit(&self, x: &[f32]) -> T {
        self.weights
            .iter()
            .zip(x)
            .fold(self.bias, |acc, (w, v)| acc + *w * T::of(*v as f64))
    }

    pub fn probability(&self, x: &[f32]) -> T {
        sigmoid(self.logit(x))
    }

    pub fn read(path: &Path) -> Result<Self, LatentError>
    where
        T: for<'de> Deserialize<'de>,
    {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), LatentError>
    where
        T: Serialize,
    {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(io_err(path))
    }
}

struct Problem<'a> {
    rows: Vec<(&'a [f32], bool)>,
    dim: usize,
}

impl Problem<'_> {
    /// Mean cross-entropy plus `l2 * |w|^2`.
    fn loss<T: Scalar>(&self, w: &[T], b: T, l2: T) -> T {
        let n = T::of_usize(self.rows.len());
        let ce: T = self
            .rows
            .iter()
            .map(|(x, odd)| {
                let z = w
                    .iter()
                    .zip(*x)
                    .fold(b, |acc, (wi, xi)| acc + *wi * T::of(*xi as f64));
                if *odd {
                    softplus(-z)
                } else {
                    softplus(z)
                }
            })
            .sum();
        ce / n + l2 * w.iter().map(|v| *v * *v).sum()
    }

    fn gradient<T: Scalar>(&self, w: &[T], b: T, l2: T) -> (Vec<T>, T) {
        let n = T::of_usize(self.rows.len());
        let mut gw = vec![T::zero(); self.dim];
        let mut gb = T::zero();
        for (x, odd) in &self.rows {
            let z = w
                .iter()
                .zip(*x)
                .fold(b, |acc, (wi, xi)| acc + *wi * T::of(*xi as f64));
            let y = if *odd { T::one() } else { T::zero() };
            let r = sigmoid(z) - y;
            for (g, xi) in gw.iter_mut().zip(*x) {
                *g += r * T::of(*xi as f64);
            }
            gb += r;
        }
        let two = T::of(2.0);
        for (g, wi) in gw.iter_mut().zip(w) {
            *g = *g / n + two * l2 * *wi;
        }
        (gw, gb / n)
    }
}

/// Maximum step halvings per iteration before the step is declared stalled.
const MAX_HALVINGS: usize = 60;

/// Fits `P(odd | x)` by full-batch gradient descent from zero weights.
/// Returns the classifier and the loss after every iteration (index 0 is
/// the initial loss). A step that would raise the loss is halved until it
/// does not, so the trace is non-increasing.
pub fn train_classifier_traced<T: Scalar>(
    clear: &EmbeddingSet,
    odd: &EmbeddingSet,
    config: &TrainConfig,
) -> Result<(LinearClassifier<T>, Vec<T>), LatentError> {
    if clear.is_empty() || odd.is_empty() {
        return Err(LatentError::Empty);
    }
    if clear.dim() != odd.dim() {
        return Err(LatentError::DimensionMismatch {
            expected: clear.dim(),
            found: odd.dim(),
        });
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(LatentError::InvalidConfig(format!(
            "learning_rate {} must be > 0",
            config.learning_rate
        )));
    }
    if !(config.l2 >= 0.0 && config.tol >= 0.0) {
        return Err(LatentError::InvalidConfig("l2 and tol must be >= 0".into()));
    }
    let problem = Problem {
        rows: clear
            .rows()
            .map(|r| (r, false))
            .chain(odd.rows().map(|r| (r, true)))
            .collect(),
        dim: clear.dim(),
    };
    let l2 = T::of(config.l2);
    let tol = T::of(config.tol);
    let mut w = vec![T::zero(); problem.dim];
    let mut b = T::zero();
    let mut loss = problem.loss(&w, b, l2);
    if !loss.is_finite() {
        return Err(LatentError::Diverged { iteration: 0 });
    }
    let mut trace = vec![loss];
    let mut iterations = 0;
    for it in 1..=config.max_iters {
        iterations = it;
        let (gw, gb) = problem.gradient(&w, b, l2);
        let mut step = T::of(config.learning_rate);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let nw: Vec<T> = w.iter().zip(&gw).map(|(wi, g)| *wi - step * *g).collect();
            let nb = b - step * gb;
            let nl = problem.loss(&nw, nb, l2);
            if nl.is_finite() && nl <= loss {
                accepted = Some((nw, nb, nl));
                break;
            }
            step /= T::of(2.0);
        }
        let Some((nw, nb, nl)) = accepted else {
            if !problem.loss(&w, b, l2).is_finite() {
                return Err(LatentError::Diverged { iteration: it });
            }
            // no descent step exists at float precision: converged
            trace.push(loss);
            break;
        };
        let decrease = loss - nl;
        w = nw;
        b = nb;
        loss = nl;
        trace.push(loss);
        if decrease < tol {
            break;
        }
    }
    let clf = LinearClassifier {
        weights: w,
        bias: b,
        training_meta: TrainingMeta {
            iterations,
            final_loss: loss,
            learning_rate: T::of(config.learning_rate),
        },
    };
    Ok((clf, trace))
}

pub fn train_classifier<T: Scalar>(
    clear: &EmbeddingSet,
    odd: &EmbeddingSet,
    config: &TrainConfig,
) -> Result<LinearClassifier<T>, LatentError> {
    train_classifier_traced(clear, odd, config).map(|(c, _)| c)
}

/// Mean predicted ODD probability over the rows.
pub fn odd_score<T: Scalar>(
    clf: &LinearClassifier<T>,
    emb: &EmbeddingSet,
) -> Result<T, LatentError> {
    if emb.is_empty() {
        return Err(LatentError::Empty);
    }
    if emb.dim() != clf.weights.len() {
        return Err(LatentError::DimensionMismatch {
            expected: clf.weights.len(),
            found: emb.dim(),
        });
    }
    let sum: T = emb.rows().map(|r| clf.probability(r)).sum();
    Ok(sum / T::of_usize(emb.len()))
}

/// Source of embeddings for the augmented images rendered at a parameter point.
pub trait EmbeddingLoader {
    fn load(&self, point: &ParamVector) -> Result<EmbeddingSet, LatentError>;
}

/// Reads `<dir>/<point.key()>.emb`.
#[derive(Debug, Clone)]
pub struct DirLoader {
    pub dir: PathBuf,
}

impl DirLoader {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, point: &ParamVector) -> PathBuf {
        self.dir.join(format!("{}.emb", point.key()))
    }
}

impl EmbeddingLoader for DirLoader {
    fn load(&self, point: &ParamVector) -> Result<EmbeddingSet, LatentError> {
        let path = self.path_for(point);
        if !path.exists() {
            return Err(LatentError::MissingEmbeddings { key: point.key() });
        }
        EmbeddingSet::read(&path)
    }
}

/// In-memory loader keyed by [`ParamVector::key`].
#[derive(Debug, Clone, Default)]
pub struct MemoryLoader {
    sets: HashMap<String, EmbeddingSet>,
}

impl MemoryLoader {
    pub fn insert(&mut self, point: &ParamVector, set: EmbeddingSet) {
        self.sets.insert(point.key(), set);
    }
}

impl EmbeddingLoader for MemoryLoader {
    fn load(&self, point: &ParamVector) -> Result<EmbeddingSet, LatentError> {
        self.sets
            .get(&point.key())
            .cloned()
            .ok_or_else(|| LatentError::MissingEmbeddings { key: point.key() })
    }
}

/// Search objective `point -> odd_score(embeddings(point))`.
pub fn latent_objective<'a, T: Scalar, L: EmbeddingLoader>(
    clf: &'a LinearClassifier<T>,
    loader: &'a L,
) -> impl FnMut(&ParamVector) -> Result<T, LatentError> + 'a {
    move |p| odd_score(clf, &loader.load(p)?)
}
