//! Paired non-parametric tests: Wilcoxon signed-rank and the sign test.
//!
//! Differences are `a - b`; exact zeros are dropped before ranking.
//! `Greater` tests whether `a` tends to exceed `b`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Largest non-zero sample size for which the Wilcoxon null is enumerated
/// exactly; larger samples use the tie-corrected normal approximation.
pub const WILCOXON_EXACT_MAX_N: usize = 20;
/// Largest sample size for the exact binomial sign test (fits `u128`).
const SIGN_EXACT_MAX_N: usize = 126;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("{test} needs at least {min} paired samples, got {n}")]
    TooFewSamples {
        test: &'static str,
        n: usize,
        min: usize,
    },
    #[error("paired samples differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("every paired difference is zero")]
    AllZeroDifferences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Wilcoxon,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Greater,
    Less,
    #[default]
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult<T = f64> {
    pub test: TestKind,
    pub alternative: Alternative,
    /// `W+` (sum of ranks of positive differences) or the count of positive
    /// differences for the sign test.
    pub statistic: T,
    pub p_value: T,
    /// Non-zero differences used.
    pub n: usize,
    pub zeros_dropped: usize,
    pub exact: bool,
}

fn differences<T: Scalar>(
    a: &[T],
    b: &[T],
    test: &'static str,
    min: usize,
) -> Result<Vec<f64>, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.len() < min {
        return Err(StatsError::TooFewSamples {
            test,
            n: a.len(),
            min,
        });
    }
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let d = x.to_f64_lossy() - y.to_f64_lossy();
            if d.is_finite() {
                Ok(d)
            } else {
                Err(StatsError::NonFinite { index: i })
            }
        })
        .collect()
}

fn combine(alt: Alternative, upper: f64, lower: f64) -> f64 {
    match alt {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

/// Twice the average ranks of `|d|` (ties share the mean rank), so every
/// value is an integer.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0u64; abs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && abs[order[end]] == abs[order[start]] {
            end += 1;
        }
        // ranks start+1..=end, mean doubled = start + 1 + end
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        start = end;
    }
    ranks
}

/// Number of sign assignments giving each doubled positive-rank sum:
/// entry `s` counts the subsets of `doubled` summing to `s`.
pub fn wilcoxon_null_counts(doubled: &[u64]) -> Vec<u64> {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Exact `P(W+ >= w)` under the null for the given doubled ranks and
/// doubled statistic.
pub fn wilcoxon_exact_upper(doubled: &[u64], w_doubled: u64) -> f64 {
    let counts = wilcoxon_null_counts(doubled);
    let hits: u64 = counts.iter().skip(w_doubled as usize).sum();
    hits as f64 / 2f64.powi(doubled.len() as i32)
}

fn normal_upper(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

pub fn wilcoxon_signed_rank<T: Scalar>(
    a: &[T],
    b: &[T],
    alt: Alternative,
) -> Result<TestResult<T>, StatsError> {
    let all = differences(a, b, "wilcoxon signed-rank", 2)?;
    let d: Vec<f64> = all.iter().copied().filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w2: u64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2: u64 = ranks.iter().sum();
    let exact = n <= WILCOXON_EXACT_MAX_N;
    let p = if exact {
        let counts = wilcoxon_null_counts(&ranks);
        let denom = 2f64.powi(n as i32);
        let upper = counts.iter().skip(w2 as usize).sum::<u64>() as f64 / denom;
        let lower = counts.iter().take(w2 as usize + 1).sum::<u64>() as f64 / denom;
        combine(alt, upper, lower)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_unstable();
        for g in sorted.chunk_by(|x, y| x == y) {
            let t = g.len() as f64;
            tie_term += t * t * t - t;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let w = w2 as f64 / 2.0;
        let sd = var.sqrt();
        let upper = normal_upper((w - mean - 0.5) / sd);
        let lower = normal_upper((mean - w - 0.5) / sd);
        combine(alt, upper.min(1.0), lower.min(1.0))
    };
    debug_assert!(w2 <= total2);
    Ok(TestResult {
        test: TestKind::Wilcoxon,
        alternative: alt,
        statistic: T::of(w2 as f64 / 2.0),
        p_value: T::of(p),
        n,
        zeros_dropped: all.len() - n,
        exact,
    })
}

fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

pub fn sign_test<T: Scalar>(
    a: &[T],
    b: &[T],
    alt: Alternative,
) -> Result<TestResult<T>, StatsError> {
    let all = differences(a, b, "sign test", 1)?;
    let n = all.iter().filter(|v| **v != 0.0).count();
    if n == 0 {
        return Err(StatsError::AllZeroDifferences);
    }
    let pos = all.iter().filter(|v| **v > 0.0).count();
    let exact = n <= SIGN_EXACT_MAX_N;
    let (upper, lower) = if exact {
        let n32 = n as u32;
        let pmf: Vec<u128> = (0..=n32).map(|k| binomial(n32, k)).collect();
        let denom = 2f64.powi(n as i32);
        let upper = pmf[pos..].iter().sum::<u128>() as f64 / denom;
        let lower = pmf[..=pos].iter().sum::<u128>() as f64 / denom;
        (upper, lower)
    } else {
        let nf = n as f64;
        let sd = (nf / 4.0).sqrt();
        let k = pos as f64;
        (
            normal_upper((k - nf / 2.0 - 0.5) / sd),
            normal_upper((nf / 2.0 - k - 0.5) / sd),
        )
    };
    Ok(TestResult {
        test: TestKind::Sign,
        alternative: alt,
        statistic: T::of_usize(pos),
        p_value: T::of(combine(alt, upper.min(1.0), lower.min(1.0))),
        n,
        zeros_dropped: all.len() - n,
        exact,
    })
}

pub fn compare_runs<T: Scalar>(
    a: &[T],
    b: &[T],
    test: TestKind,
    alt: Alternative,
) -> Result<TestResult<T>, StatsError> {
    match test {
        TestKind::Wilcoxon => wilcoxon_signed_rank(a, b, alt),
        TestKind::Sign => sign_test(a, b, alt),
    }
}
