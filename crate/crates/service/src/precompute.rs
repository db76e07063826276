//! Offline pipeline: parse, filter, align, project, compute neighbor tables
//! and write the cache directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context};
use embdiff_core::ingest::{rank_frequencies, read_frequency_file};
use embdiff_core::{
    filter_top_n, intersect_vocabulary, knn_all, parse_embedding_file, pca_project, Dataset, Format, NeighborTable,
    Projection2D, RawEmbedding, Registry,
};

use crate::store::write_dataset;

/// `name=path:format`, e.g. `wiki=vectors/wiki.txt:glove_text`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub path: PathBuf,
    pub format: Format,
}

impl FromStr for ModelSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let (name, rest) = s.split_once('=').context("expected name=path:format")?;
        let (path, format) = rest.rsplit_once(':').context("expected name=path:format")?;
        ensure!(!name.is_empty() && !path.is_empty(), "expected name=path:format");
        Ok(ModelSpec { name: name.to_owned(), path: path.into(), format: format.parse()? })
    }
}

/// A frequency file for every model, or for one named model.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqSpec {
    pub model: Option<String>,
    pub path: PathBuf,
}

impl FreqSpec {
    /// `name=path` binds to a model when `name` is one of `models`;
    /// anything else is a path shared by all models.
    pub fn parse(s: &str, models: &[ModelSpec]) -> FreqSpec {
        if let Some((name, path)) = s.split_once('=') {
            if models.iter().any(|m| m.name == name) {
                return FreqSpec { model: Some(name.to_owned()), path: path.into() };
            }
        }
        FreqSpec { model: None, path: s.into() }
    }
}

#[derive(Debug, Clone)]
pub struct PrecomputeConfig {
    pub dataset: String,
    pub models: Vec<ModelSpec>,
    pub top_n: Option<usize>,
    pub freqs: Vec<FreqSpec>,
    pub metrics: Vec<String>,
    pub k_max: usize,
}

pub struct Precomputed {
    pub dataset: Dataset,
    pub projections: Vec<Projection2D>,
    /// One table per model and metric, models in dataset order within each
    /// metric.
    pub tables: Vec<NeighborTable>,
}

impl Precomputed {
    /// `(a, b)` tables for every unordered model pair under every metric.
    pub fn pairs(&self) -> Vec<(&NeighborTable, &NeighborTable)> {
        let m = self.dataset.models.len();
        let mut out = Vec::new();
        for chunk in self.tables.chunks(m) {
            for i in 0..m {
                for j in i + 1..m {
                    out.push((&chunk[i], &chunk[j]));
                }
            }
        }
        out
    }
}

fn load_model(spec: &ModelSpec, top_n: Option<usize>, freqs: &[FreqSpec]) -> anyhow::Result<RawEmbedding> {
    let raw = parse_embedding_file(&spec.path, spec.format, &spec.name)
        .with_context(|| format!("model {:?}: reading {}", spec.name, spec.path.display()))?;
    let Some(n) = top_n else { return Ok(raw) };
    let freq = freqs
        .iter()
        .find(|f| f.model.as_deref() == Some(spec.name.as_str()))
        .or_else(|| freqs.iter().find(|f| f.model.is_none()));
    let counts: HashMap<String, u64> = match freq {
        Some(f) => read_frequency_file(&f.path).with_context(|| format!("reading {}", f.path.display()))?,
        // embedding files are conventionally sorted by corpus frequency
        None => rank_frequencies(&raw),
    };
    filter_top_n(&raw, &counts, n).with_context(|| format!("model {:?}: top-{n} filter", spec.name))
}

/// Parses and aligns the configured models. Files are read concurrently.
pub fn build_dataset(config: &PrecomputeConfig) -> anyhow::Result<Dataset> {
    ensure!(config.models.len() >= 2, "need at least 2 models, got {}", config.models.len());
    let raws: Vec<anyhow::Result<RawEmbedding>> = std::thread::scope(|s| {
        let handles: Vec<_> = config
            .models
            .iter()
            .map(|m| s.spawn(move || load_model(m, config.top_n, &config.freqs)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("model loader panicked")).collect()
    });
    let raws = raws.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    Ok(intersect_vocabulary(&raws, &config.dataset)?)
}

/// Projections and `k_max` neighbor tables for an aligned dataset.
pub fn precompute_dataset(dataset: Dataset, metrics: &[String], k_max: usize) -> anyhow::Result<Precomputed> {
    ensure!(!metrics.is_empty(), "need at least one metric");
    let registry = Registry::with_builtins();
    let n = dataset.vocabulary.len();
    ensure!(k_max >= 1 && k_max < n, "k_max {k_max} must lie in [1, {}] for a vocabulary of {n}", n.saturating_sub(1));
    let mut seen = Vec::new();
    for m in metrics {
        if seen.contains(m) {
            bail!("metric {m:?} listed twice");
        }
        seen.push(m.clone());
    }
    let projections = dataset
        .models
        .iter()
        .map(|m| pca_project(m).with_context(|| format!("projecting model {:?}", m.name)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut tables = Vec::new();
    for metric in metrics {
        let distance = registry.metric(metric)?;
        for m in &dataset.models {
            tables.push(knn_all(m, distance.as_ref(), k_max).with_context(|| format!("k-NN for model {:?} ({metric})", m.name))?);
        }
    }
    Ok(Precomputed { dataset, projections, tables })
}

/// Runs the full pipeline and writes `<out>/<dataset>/`.
pub fn run(config: &PrecomputeConfig, out: &Path) -> anyhow::Result<(Precomputed, PathBuf)> {
    let dataset = build_dataset(config)?;
    let pre = precompute_dataset(dataset, &config.metrics, config.k_max)?;
    let dir = write_dataset(out, &pre.dataset, config.k_max, &pre.projections, &pre.pairs())?;
    Ok((pre, dir))
}
