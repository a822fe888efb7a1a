//! Paired significance tests over per-fold scores.
//!
//! Differences are always taken as `treatment - baseline`, so a positive
//! difference means the treatment variant did better on that fold.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("paired samples differ in length ({baseline} vs {treatment})")]
    LengthMismatch { baseline: usize, treatment: usize },
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("paired differences have zero variance")]
    ZeroVariance,
    #[error("non-finite value in paired sample")]
    NonFinite,
}

/// Largest `n_eff` for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 25;

/// Values within this distance, scaled by `max(|a|, |b|, 1)`, are tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    baseline: Vec<f64>,
    treatment: Vec<f64>,
}

impl PairedSample {
    pub fn new(baseline: Vec<f64>, treatment: Vec<f64>) -> Result<Self, StatsError> {
        if baseline.len() != treatment.len() {
            return Err(StatsError::LengthMismatch {
                baseline: baseline.len(),
                treatment: treatment.len(),
            });
        }
        if baseline.len() < 2 {
            return Err(StatsError::TooFewPairs(baseline.len()));
        }
        if baseline.iter().chain(&treatment).any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(PairedSample {
            baseline,
            treatment,
        })
    }

    pub fn from_differences(diffs: &[f64]) -> Result<Self, StatsError> {
        Self::new(vec![0.0; diffs.len()], diffs.to_vec())
    }

    pub fn k(&self) -> usize {
        self.baseline.len()
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment
    }

    pub fn differences(&self) -> Vec<f64> {
        self.treatment
            .iter()
            .zip(&self.baseline)
            .map(|(t, b)| t - b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub w_statistic: f64,
    pub n_effective: usize,
    pub p_value: f64,
    /// One-sided p for the alternative "treatment > baseline".
    pub p_one_sided: f64,
    pub method: PValueMethod,
}

impl WilcoxonResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && nearly_equal(values[order[j]], values[order[i]]) {
            j += 1;
        }
        // positions i..j share ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Sizes of the tie groups among `values`.
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && nearly_equal(sorted[j], sorted[i]) {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Null distribution of `W+` for the given ranks: `counts[s]` is the number
/// of sign assignments whose doubled positive rank sum equals `s`.
fn signed_rank_counts(ranks: &[f64]) -> Vec<u64> {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &d in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + d] += counts[s];
            }
        }
        reach += d;
    }
    counts
}

/// Exact `P(W+ <= w)` under the null, given the ranks.
fn exact_lower_tail(ranks: &[f64], w: f64) -> f64 {
    let counts = signed_rank_counts(ranks);
    let limit = (w * 2.0).round() as usize;
    let hits: u64 = counts.iter().take(limit + 1).sum();
    hits as f64 / 2f64.powi(ranks.len() as i32)
}

fn normal_lower_tail(n: usize, ties: &[usize], w: f64) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_adj: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_adj;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w - mean + 0.5) / var.sqrt();
    Normal::new(0.0, 1.0).expect("standard normal").cdf(z)
}

/// Wilcoxon signed-rank test on `treatment - baseline`.
///
/// Zero differences are dropped, absolute differences ranked with average
/// ranks on ties, and `W = min(W+, W-)`. The two-sided p-value is exact for
/// up to [`EXACT_LIMIT`] non-zero pairs and uses a tie-corrected normal
/// approximation with continuity correction beyond that.
///
/// ```
/// use elm_misinfo::stats::{wilcoxon_signed_rank, PairedSample};
///
/// let s = PairedSample::from_differences(&[0.01; 10]).unwrap();
/// let r = wilcoxon_signed_rank(&s).unwrap();
/// assert_eq!(r.w_statistic, 0.0);
/// assert_eq!(r.p_value, 0.001953125);
/// ```
pub fn wilcoxon_signed_rank(sample: &PairedSample) -> Result<WilcoxonResult, StatsError> {
    let diffs: Vec<f64> = sample
        .differences()
        .into_iter()
        .filter(|d| !nearly_equal(*d, 0.0))
        .collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .fold(0.0, |acc, (_, r)| acc + r);
    let w_minus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d < 0.0)
        .fold(0.0, |acc, (_, r)| acc + r);
    let w = w_plus.min(w_minus);
    let n = diffs.len();

    let (p_two, p_one, method) = if n <= EXACT_LIMIT {
        let two = (2.0 * exact_lower_tail(&ranks, w)).min(1.0);
        // P(W+ >= observed) = P(W- <= observed W-) by symmetry
        let one = exact_lower_tail(&ranks, w_minus);
        (two, one, PValueMethod::Exact)
    } else {
        let ties = tie_groups(&abs);
        let two = (2.0 * normal_lower_tail(n, &ties, w)).min(1.0);
        let one = normal_lower_tail(n, &ties, w_minus).min(1.0);
        (two, one, PValueMethod::NormalApproximation)
    };

    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        w_statistic: w,
        n_effective: n,
        p_value: p_two,
        p_one_sided: p_one,
        method,
    })
}

/// Largest `W` rejected at two-sided level `alpha` for `n` untied pairs, or
/// `None` when no outcome is significant.
pub fn critical_value(n: usize, alpha: f64) -> Option<usize> {
    let ranks: Vec<f64> = (1..=n).map(|r| r as f64).collect();
    let counts = signed_rank_counts(&ranks);
    let total = 2f64.powi(n as i32);
    let mut cumulative = 0u64;
    let mut best = None;
    for (doubled, &c) in counts.iter().enumerate() {
        cumulative += c;
        if doubled % 2 == 1 {
            continue;
        }
        if 2.0 * cumulative as f64 / total <= alpha {
            best = Some(doubled / 2);
        } else {
            break;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Alternative: treatment mean exceeds baseline mean.
    TreatmentGreater,
    /// Alternative: baseline mean exceeds treatment mean.
    BaselineGreater,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub direction: Direction,
    pub p_one_sided: f64,
}

/// One-tailed paired t-test on `treatment - baseline`.
pub fn paired_t_test(
    sample: &PairedSample,
    direction: Direction,
) -> Result<TTestResult, StatsError> {
    let d = sample.differences();
    let k = d.len() as f64;
    let mean = d.iter().sum::<f64>() / k;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let scale = d
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    if var.sqrt() <= 1e-12 * scale {
        return Err(StatsError::ZeroVariance);
    }
    let t = mean / (var.sqrt() / k.sqrt());
    let df = d.len() - 1;
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let upper = 1.0 - dist.cdf(t);
    let p = match direction {
        Direction::TreatmentGreater => upper,
        Direction::BaselineGreater => dist.cdf(t),
    };
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        direction,
        p_one_sided: p,
    })
}
