//! Local neighborhood similarity: per-object Jaccard overlap of the k-NN
//! sets an object has in two embedding spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::NeighborTable;

pub const DEFAULT_K: usize = 50;
pub const DEFAULT_K_MAX: usize = 100;
pub const DEFAULT_BINS: usize = 20;

/// Similarity between two neighbor sets, in `[0, 1]`.
///
/// Inputs are index sets without duplicates, in any order.
pub trait SetSimilarity: Send + Sync {
    fn name(&self) -> &str;
    fn similarity(&self, a: &[u32], b: &[u32]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Jaccard;

impl SetSimilarity for Jaccard {
    fn name(&self) -> &str {
        "jaccard"
    }

    fn similarity(&self, a: &[u32], b: &[u32]) -> Result<f64> {
        jaccard(a, b)
    }
}

/// `|A ∩ B| / |A ∪ B|`.
pub fn jaccard(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::Empty("both neighbor sets".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let common = sorted_intersection_len(&a, &b);
    Ok(ratio(common, a.len() + b.len() - common))
}

#[inline]
pub(crate) fn ratio(common: usize, union: usize) -> f64 {
    common as f64 / union as f64
}

pub(crate) fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub k: usize,
    pub metric: String,
    pub k_max: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig { k: DEFAULT_K, metric: "cosine".into(), k_max: DEFAULT_K_MAX }
    }
}

impl ComparisonConfig {
    /// Checks `1 ≤ k ≤ k_max ≤ vocabulary − 1`.
    pub fn validate(&self, vocabulary: usize) -> Result<()> {
        if self.k == 0 || self.k > self.k_max || self.k_max + 1 > vocabulary {
            return Err(Error::InvalidConfig(format!(
                "need 1 ≤ k ({}) ≤ k_max ({}) ≤ vocabulary − 1 ({})",
                self.k,
                self.k_max,
                vocabulary.saturating_sub(1)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub dataset: String,
    pub model_a: String,
    pub model_b: String,
    pub metric: String,
    pub k: usize,
    /// Indexed by vocabulary position.
    pub scores: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
}

/// Scores every object with Jaccard similarity over the first `k` entries of
/// each table.
pub fn compute_lns(a: &NeighborTable, b: &NeighborTable, k: usize) -> Result<ComparisonResult> {
    compute_lns_with(a, b, k, &Jaccard)
}

pub fn compute_lns_with(
    a: &NeighborTable,
    b: &NeighborTable,
    k: usize,
    similarity: &dyn SetSimilarity,
) -> Result<ComparisonResult> {
    if a.dataset != b.dataset {
        return Err(Error::Mismatch(format!("tables come from datasets {:?} and {:?}", a.dataset, b.dataset)));
    }
    if a.metric != b.metric {
        return Err(Error::Mismatch(format!("tables use metrics {:?} and {:?}", a.metric, b.metric)));
    }
    if a.len() != b.len() {
        return Err(Error::Mismatch(format!("tables cover {} and {} objects", a.len(), b.len())));
    }
    if k == 0 || k > a.k_max || k > b.k_max {
        return Err(Error::InvalidConfig(format!("k = {k} outside [1, {}]", a.k_max.min(b.k_max))));
    }

    let mut scores = Vec::with_capacity(a.len());
    for w in 0..a.len() {
        let s = similarity.similarity(a.neighbors(w, k), b.neighbors(w, k))?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Degenerate(format!("{} similarity {s} outside [0, 1]", similarity.name())));
        }
        scores.push(s);
    }
    let histogram = similarity_histogram(&scores, DEFAULT_BINS)?;
    Ok(ComparisonResult {
        dataset: a.dataset.clone(),
        model_a: a.model.clone(),
        model_b: b.model.clone(),
        metric: a.metric.clone(),
        k,
        scores,
        histogram,
    })
}

/// Equal-width bins over `[0, 1]`, each `[lower, upper)` except the last,
/// which also holds 1.0.
pub fn similarity_histogram(scores: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if scores.is_empty() {
        return Err(Error::Empty("score list".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let lower = |i: usize| i as f64 / bins as f64;
    let mut hist: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin { lower: lower(i), upper: lower(i + 1), count: 0 })
        .collect();
    for &s in scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidConfig(format!("score {s} outside [0, 1]")));
        }
        let mut i = ((s * bins as f64) as usize).min(bins - 1);
        // keep assignment consistent with the reported edges under rounding
        while i > 0 && s < hist[i].lower {
            i -= 1;
        }
        while i + 1 < bins && s >= hist[i + 1].lower {
            i += 1;
        }
        hist[i].count += 1;
    }
    Ok(hist)
}
