//! Augmentation-parameter search over a declared parameter space.
//!
//! Grid order is odometer-style: the first declared dimension varies
//! slowest, the last fastest. Both searches break objective ties in favor
//! of the earliest evaluation.

use std::error::Error as StdError;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::metrics::{Direction, MetricKey, MetricSet};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Default cap on the number of objective evaluations.
pub const DEFAULT_BUDGET: usize = 10_000;
/// Environment variable overriding [`DEFAULT_BUDGET`] in the CLI.
pub const BUDGET_ENV: &str = "AUGFORGE_BUDGET";

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid of {required} points exceeds the evaluation budget of {cap}")]
    BudgetExceeded { required: u128, cap: usize },
    #[error("objective returned a non-finite value at evaluation {index}")]
    NonFiniteObjective { index: usize },
    #[error("metric `{0}` missing from a report")]
    UnknownMetric(MetricKey),
    #[error("objective failed: {0}")]
    Objective(Box<dyn StdError + Send + Sync>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DimKind {
    Continuous { lo: f64, hi: f64 },
    Discrete { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDim {
    pub name: String,
    #[serde(flatten)]
    pub kind: DimKind,
    /// Space continuous points geometrically instead of linearly.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub log_scale: bool,
}

impl ParamDim {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::Continuous { lo, hi },
            log_scale: false,
        }
    }

    pub fn log_continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            log_scale: true,
            ..Self::continuous(name, lo, hi)
        }
    }

    pub fn discrete(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::Discrete { values },
            log_scale: false,
        }
    }

    fn grid_values(&self, points: usize) -> Vec<f64> {
        match &self.kind {
            DimKind::Discrete { values } => values.clone(),
            DimKind::Continuous { lo, hi } => {
                if points == 1 {
                    return vec![*lo];
                }
                let last = points - 1;
                (0..points)
                    .map(|i| {
                        if i == 0 {
                            *lo
                        } else if i == last {
                            *hi
                        } else {
                            let t = i as f64 / last as f64;
                            if self.log_scale {
                                (lo.ln() + t * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi)
                            } else {
                                lo + t * (hi - lo)
                            }
                        }
                    })
                    .collect()
            }
        }
    }

    fn sample(&self, rng: &mut SeededRng) -> f64 {
        match &self.kind {
            DimKind::Discrete { values } => values[rng.below(values.len())],
            DimKind::Continuous { lo, hi } => {
                let u = rng.next_f64();
                let v = if self.log_scale {
                    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + u * (hi - lo)
                };
                v.clamp(*lo, *hi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub dims: Vec<ParamDim>,
}

impl ParamSpace {
    pub fn new(dims: Vec<ParamDim>) -> Result<Self, SearchError> {
        let s = Self { dims };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidSpace(m));
        if self.dims.is_empty() {
            return bad("no dimensions".into());
        }
        for (i, d) in self.dims.iter().enumerate() {
            if d.name.is_empty() {
                return bad(format!("dimension {i} has an empty name"));
            }
            if self.dims[..i].iter().any(|o| o.name == d.name) {
                return bad(format!("duplicate dimension `{}`", d.name));
            }
            match &d.kind {
                DimKind::Continuous { lo, hi } => {
                    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                        return bad(format!(
                            "`{}`: need finite lo < hi, got [{lo}, {hi}]",
                            d.name
                        ));
                    }
                    if d.log_scale && *lo <= 0.0 {
                        return bad(format!("`{}`: log scale needs lo > 0", d.name));
                    }
                }
                DimKind::Discrete { values } => {
                    if values.is_empty() {
                        return bad(format!("`{}`: empty value list", d.name));
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return bad(format!("`{}`: non-finite value", d.name));
                    }
                    for (j, v) in values.iter().enumerate() {
                        if values[..j].contains(v) {
                            return bad(format!("`{}`: duplicate value {v}", d.name));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of distinct points when every dimension is discrete.
    pub fn discrete_cardinality(&self) -> Option<u128> {
        self.dims.iter().try_fold(1u128, |acc, d| match &d.kind {
            DimKind::Discrete { values } => Some(acc.saturating_mul(values.len() as u128)),
            DimKind::Continuous { .. } => None,
        })
    }

    /// Number of grid points for `points_per_dim` samples on continuous axes.
    pub fn grid_size(&self, points_per_dim: usize) -> u128 {
        self.dims.iter().fold(1u128, |acc, d| {
            let n = match &d.kind {
                DimKind::Discrete { values } => values.len(),
                DimKind::Continuous { .. } => points_per_dim,
            };
            acc.saturating_mul(n as u128)
        })
    }

    /// The full Cartesian grid in evaluation order.
    pub fn grid(&self, points_per_dim: usize) -> Vec<ParamVector> {
        let axes: Vec<Vec<f64>> = self
            .dims
            .iter()
            .map(|d| d.grid_values(points_per_dim))
            .collect();
        if axes.iter().any(Vec::is_empty) {
            return Vec::new();
        }
        let total: usize = axes.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            out.push(ParamVector(
                self.dims
                    .iter()
                    .zip(&axes)
                    .zip(&idx)
                    .map(|((d, a), &i)| (d.name.clone(), a[i]))
                    .collect(),
            ));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    /// One seeded draw: uniform (log-uniform when flagged) on continuous
    /// axes, uniform over values on discrete ones. Dimensions are drawn in
    /// declared order, one generator output each.
    pub fn sample(&self, rng: &mut SeededRng) -> ParamVector {
        ParamVector(
            self.dims
                .iter()
                .map(|d| (d.name.clone(), d.sample(rng)))
                .collect(),
        )
    }

    pub fn contains(&self, p: &ParamVector) -> bool {
        p.0.len() == self.dims.len()
            && self.dims.iter().zip(&p.0).all(|(d, (n, v))| {
                *n == d.name
                    && match &d.kind {
                        DimKind::Continuous { lo, hi } => (*lo..=*hi).contains(v),
                        DimKind::Discrete { values } => values.contains(v),
                    }
            })
    }
}

/// Named parameter values in the space's declared order. Serialized as a
/// JSON object whose key order follows the declaration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(pub Vec<(String, f64)>);

impl ParamVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(n, v)| (n.as_str(), *v))
    }

    /// Stable content key: the first 16 hex digits of SHA-256 over the lines
    /// `<name>=<16 hex digits of the f64 bit pattern>\n` in declared order.
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        for (n, v) in &self.0 {
            h.update(format!("{n}={:016x}\n", v.to_bits()).as_bytes());
        }
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Exact equality of names and value bit patterns.
    pub fn same_point(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|((a, x), (b, y))| a == b && x.to_bits() == y.to_bits())
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

impl Serialize for ParamVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for ParamVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ParamVector;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of parameter names to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<ParamVector, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(ParamVector(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation<T = f64> {
    pub params: ParamVector,
    pub objective: T,
}

/// Every evaluation in declared order plus the index of the best one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace<T = f64> {
    pub evaluations: Vec<Evaluation<T>>,
    pub best_index: usize,
}

impl<T: Scalar> SearchTrace<T> {
    pub fn best(&self) -> &Evaluation<T> {
        &self.evaluations[self.best_index]
    }

    pub fn len(&self) -> usize {
        self.evaluations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluations.is_empty()
    }
}

/// First index holding the maximum.
fn argmax<T: Scalar>(values: impl Iterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

fn evaluate_all<T, F, E>(
    points: Vec<ParamVector>,
    mut objective: F,
) -> Result<SearchTrace<T>, SearchError>
where
    T: Scalar,
    F: FnMut(&ParamVector) -> Result<T, E>,
    E: Into<Box<dyn StdError + Send + Sync>>,
{
    let mut evaluations = Vec::with_capacity(points.len());
    for (index, params) in points.into_iter().enumerate() {
        let value = objective(&params).map_err(|e| SearchError::Objective(e.into()))?;
        if !value.is_finite() {
            return Err(SearchError::NonFiniteObjective { index });
        }
        evaluations.push(Evaluation {
            params,
            objective: value,
        });
    }
    let best_index = argmax(evaluations.iter().map(|e| e.objective));
    Ok(SearchTrace {
        evaluations,
        best_index,
    })
}

/// Exhaustive search over the grid with `points_per_dim` points on each
/// continuous axis (discrete axes use all their values).
pub fn grid_search<T, F, E>(
    space: &ParamSpace,
    points_per_dim: usize,
    budget: usize,
    objective: F,
) -> Result<SearchTrace<T>, SearchError>
where
    T: Scalar,
    F: FnMut(&ParamVector) -> Result<T, E>,
    E: Into<Box<dyn StdError + Send + Sync>>,
{
    space.validate()?;
    if points_per_dim == 0 {
        return Err(SearchError::InvalidArgument(
            "points per dimension must be >= 1".into(),
        ));
    }
    let required = space.grid_size(points_per_dim);
    if required > budget as u128 {
        return Err(SearchError::BudgetExceeded {
            required,
            cap: budget,
        });
    }
    evaluate_all(space.grid(points_per_dim), objective)
}

/// `n_samples` seeded draws from the space.
pub fn random_search<T, F, E>(
    space: &ParamSpace,
    n_samples: usize,
    seed: u64,
    objective: F,
) -> Result<SearchTrace<T>, SearchError>
where
    T: Scalar,
    F: FnMut(&ParamVector) -> Result<T, E>,
    E: Into<Box<dyn StdError + Send + Sync>>,
{
    space.validate()?;
    if n_samples == 0 {
        return Err(SearchError::InvalidArgument(
            "sample count must be >= 1".into(),
        ));
    }
    let mut rng = SeededRng::new(seed);
    let points = (0..n_samples).map(|_| space.sample(&mut rng)).collect();
    evaluate_all(points, objective)
}

/// Improvement of `candidate` over `baseline` on one metric, oriented so
/// that larger is always better.
pub fn improvement_objective<T: Scalar>(
    baseline: &MetricSet<T>,
    candidate: &MetricSet<T>,
    key: MetricKey,
) -> Result<T, SearchError> {
    let b = baseline.get(key).ok_or(SearchError::UnknownMetric(key))?;
    let c = candidate.get(key).ok_or(SearchError::UnknownMetric(key))?;
    Ok(match key.direction() {
        Direction::HigherIsBetter => c - b,
        Direction::LowerIsBetter => b - c,
    })
}
