//! Distance functions and the name-keyed registry integrators extend.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ingest::AlignedModel;
use crate::lns::{Jaccard, SetSimilarity};

/// Distance between two embedding vectors.
///
/// Implementations must be symmetric and bit-deterministic: the k-NN tie
/// rule relies on `distance(u, v)` being exactly reproducible.
pub trait Distance: Send + Sync {
    fn name(&self) -> &str;

    fn distance(&self, u: &[f32], v: &[f32]) -> Result<f64>;

    /// Prepares a model for many row-against-rows evaluations. The default
    /// falls back to pairwise [`Distance::distance`] calls.
    fn prepare<'a>(&'a self, model: &'a AlignedModel) -> Result<Box<dyn RowDistances + 'a>> {
        Ok(Box::new(Pairwise { metric: self, model }))
    }
}

/// Distances from one query row to a contiguous block of candidate rows.
pub trait RowDistances: Send + Sync {
    fn fill(&self, query: usize, candidates: Range<usize>, out: &mut [f64]) -> Result<()>;
}

struct Pairwise<'a, D: ?Sized> {
    metric: &'a D,
    model: &'a AlignedModel,
}

impl<D: Distance + ?Sized> RowDistances for Pairwise<'_, D> {
    fn fill(&self, query: usize, candidates: Range<usize>, out: &mut [f64]) -> Result<()> {
        let q = self.model.row(query);
        for (slot, c) in out.iter_mut().zip(candidates) {
            *slot = self.metric.distance(q, self.model.row(c))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Cosine,
    Euclidean,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Cosine, Metric::Euclidean];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::UnknownMetric(other.to_owned())),
        }
    }
}

/// Dot product with four independent `f64` lanes. Argument order does not
/// affect the result.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn squared_l2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn cosine_from_parts(dot: f64, norm_u: f64, norm_v: f64) -> f64 {
    (1.0 - dot / (norm_u * norm_v)).clamp(0.0, 2.0)
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Distance between two vectors under a built-in metric.
pub fn distance(u: &[f32], v: &[f32], metric: Metric) -> Result<f64> {
    metric.distance(u, v)
}

impl Distance for Metric {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn distance(&self, u: &[f32], v: &[f32]) -> Result<f64> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch(u.len(), v.len()));
        }
        let (u, v) = (widen(u), widen(v));
        match self {
            Metric::Euclidean => Ok(squared_l2(&u, &v).sqrt()),
            Metric::Cosine => {
                let nu = dot(&u, &u).sqrt();
                let nv = dot(&v, &v).sqrt();
                if nu == 0.0 {
                    return Err(Error::ZeroNorm { index: 0 });
                }
                if nv == 0.0 {
                    return Err(Error::ZeroNorm { index: 1 });
                }
                Ok(cosine_from_parts(dot(&u, &v), nu, nv))
            }
        }
    }

    fn prepare<'a>(&'a self, model: &'a AlignedModel) -> Result<Box<dyn RowDistances + 'a>> {
        let rows: Vec<f64> = model.data.iter().map(|&x| x as f64).collect();
        let dim = model.dim;
        let norms = match self {
            Metric::Cosine => {
                let norms: Vec<f64> = rows.chunks_exact(dim).map(|r| dot(r, r).sqrt()).collect();
                if let Some(index) = norms.iter().position(|&n| n == 0.0) {
                    return Err(Error::ZeroNorm { index });
                }
                norms
            }
            Metric::Euclidean => Vec::new(),
        };
        Ok(Box::new(PreparedRows { metric: *self, dim, rows, norms }))
    }
}

struct PreparedRows {
    metric: Metric,
    dim: usize,
    rows: Vec<f64>,
    norms: Vec<f64>,
}

impl PreparedRows {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

impl RowDistances for PreparedRows {
    fn fill(&self, query: usize, candidates: Range<usize>, out: &mut [f64]) -> Result<()> {
        let q = self.row(query);
        match self.metric {
            Metric::Cosine => {
                let nq = self.norms[query];
                for (slot, c) in out.iter_mut().zip(candidates) {
                    *slot = cosine_from_parts(dot(q, self.row(c)), nq, self.norms[c]);
                }
            }
            Metric::Euclidean => {
                for (slot, c) in out.iter_mut().zip(candidates) {
                    *slot = squared_l2(q, self.row(c)).sqrt();
                }
            }
        }
        Ok(())
    }
}

/// Name-keyed distance and set-similarity functions. Built-ins are
/// `cosine`, `euclidean` and `jaccard`.
#[derive(Clone)]
pub struct Registry {
    metrics: BTreeMap<String, Arc<dyn Distance>>,
    similarities: BTreeMap<String, Arc<dyn SetSimilarity>>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("metrics", &self.metrics.keys().collect::<Vec<_>>())
            .field("similarities", &self.similarities.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry { metrics: BTreeMap::new(), similarities: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        for m in Metric::ALL {
            r.register_metric(Arc::new(m));
        }
        r.register_similarity(Arc::new(Jaccard));
        r
    }

    /// Registers a metric under its own name, replacing any previous entry.
    pub fn register_metric(&mut self, metric: Arc<dyn Distance>) {
        self.metrics.insert(metric.name().to_owned(), metric);
    }

    pub fn register_similarity(&mut self, similarity: Arc<dyn SetSimilarity>) {
        self.similarities.insert(similarity.name().to_owned(), similarity);
    }

    pub fn metric(&self, name: &str) -> Result<Arc<dyn Distance>> {
        self.metrics.get(name).cloned().ok_or_else(|| Error::UnknownMetric(name.to_owned()))
    }

    pub fn similarity(&self, name: &str) -> Result<Arc<dyn SetSimilarity>> {
        self.similarities.get(name).cloned().ok_or_else(|| Error::UnknownMetric(name.to_owned()))
    }

    pub fn metric_names(&self) -> impl Iterator<Item = &str> {
        self.metrics.keys().map(String::as_str)
    }

    pub fn similarity_names(&self) -> impl Iterator<Item = &str> {
        self.similarities.keys().map(String::as_str)
    }
}
