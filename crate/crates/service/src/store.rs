//! On-disk cache directory.
//!
//! ```text
//! <root>/<dataset>/manifest.json
//! <root>/<dataset>/models/<model>.tsv
//! <root>/<dataset>/projections/<model>.json
//! <root>/<dataset>/neighbors/<a>--<b>.<metric>.lnscache
//! ```

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use embdiff_core::cache::{load_comparison_cache, save_comparison_cache};
use embdiff_core::ingest::{parse_embedding_file, write_embedding};
use embdiff_core::{AlignedModel, Dataset, Format, NeighborTable, Projection2D, Registry};
use serde::{Deserialize, Serialize};

use crate::state::{DatasetEntry, Service};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestModel {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPair {
    pub a: String,
    pub b: String,
    pub metric: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dataset: String,
    pub vocabulary_size: usize,
    pub k_max: usize,
    pub models: Vec<ManifestModel>,
    pub pairs: Vec<ManifestPair>,
}

fn check_name(kind: &str, name: &str) -> anyhow::Result<()> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains("--")
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    ensure!(ok, "{kind} name {name:?} must be ASCII letters, digits, '-', '_' or '.' (no \"--\")");
    Ok(())
}

pub fn pair_file(a: &str, b: &str, metric: &str) -> String {
    format!("{a}--{b}.{metric}.lnscache")
}

/// Writes a dataset, its projections and the given pair tables under
/// `root/<dataset>`. `tables` holds `(table_a, table_b)` per pair and metric.
pub fn write_dataset(
    root: &Path,
    dataset: &Dataset,
    k_max: usize,
    projections: &[Projection2D],
    tables: &[(&NeighborTable, &NeighborTable)],
) -> anyhow::Result<PathBuf> {
    check_name("dataset", &dataset.id)?;
    let dir = root.join(&dataset.id);
    for sub in ["models", "projections", "neighbors"] {
        fs::create_dir_all(dir.join(sub)).with_context(|| format!("creating {}", dir.join(sub).display()))?;
    }
    for m in &dataset.models {
        check_name("model", &m.name)?;
        let path = dir.join("models").join(format!("{}.tsv", m.name));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_embedding(BufWriter::new(file), Format::Tsv, &dataset.vocabulary, m.dim, &m.data)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    for p in projections {
        let path = dir.join("projections").join(format!("{}.json", p.model));
        fs::write(&path, serde_json::to_vec(p)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut pairs = Vec::new();
    for (a, b) in tables {
        check_name("metric", &a.metric)?;
        let file = pair_file(&a.model, &b.model, &a.metric);
        let path = dir.join("neighbors").join(&file);
        save_comparison_cache(&path, a, b).with_context(|| format!("writing {}", path.display()))?;
        pairs.push(ManifestPair { a: a.model.clone(), b: b.model.clone(), metric: a.metric.clone(), file });
    }
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        dataset: dataset.id.clone(),
        vocabulary_size: dataset.vocabulary.len(),
        k_max,
        models: dataset.models.iter().map(|m| ManifestModel { name: m.name.clone(), dim: m.dim }).collect(),
        pairs,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(dir)
}

/// Loads one dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> anyhow::Result<DatasetEntry> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_slice(
        &fs::read(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?,
    )
    .with_context(|| format!("parsing {}", manifest_path.display()))?;
    if manifest.format_version != MANIFEST_VERSION {
        bail!(
            "{}: manifest format version {} is not supported (expected {MANIFEST_VERSION})",
            manifest_path.display(),
            manifest.format_version
        );
    }
    check_name("dataset", &manifest.dataset)?;

    let mut vocabulary: Option<Vec<String>> = None;
    let mut models = Vec::new();
    let mut projections = std::collections::BTreeMap::new();
    for m in &manifest.models {
        check_name("model", &m.name)?;
        let path = dir.join("models").join(format!("{}.tsv", m.name));
        let raw = parse_embedding_file(&path, Format::Tsv, &m.name).with_context(|| format!("reading {}", path.display()))?;
        ensure!(raw.dim == m.dim, "{}: dimension {} does not match manifest {}", path.display(), raw.dim, m.dim);
        match &vocabulary {
            None => vocabulary = Some(raw.tokens.clone()),
            Some(v) => ensure!(*v == raw.tokens, "{}: vocabulary differs from the other models", path.display()),
        }
        models.push(AlignedModel::new(manifest.dataset.clone(), m.name.clone(), m.dim, raw.data)?);

        let ppath = dir.join("projections").join(format!("{}.json", m.name));
        let p: Projection2D = serde_json::from_slice(&fs::read(&ppath).with_context(|| format!("reading {}", ppath.display()))?)
            .with_context(|| format!("parsing {}", ppath.display()))?;
        ensure!(p.model == m.name && p.coords.len() == models[0].len(), "{}: projection does not match model", ppath.display());
        projections.insert(m.name.clone(), p);
    }
    let vocabulary = vocabulary.context("manifest lists no models")?;
    ensure!(vocabulary.len() == manifest.vocabulary_size, "vocabulary size differs from manifest");
    let dataset = Dataset::from_aligned(manifest.dataset.clone(), vocabulary, models)?;
    let entry = DatasetEntry::with_projections(dataset, manifest.k_max, projections)?;

    for pair in &manifest.pairs {
        ensure!(pair.file == pair_file(&pair.a, &pair.b, &pair.metric), "unexpected cache file name {:?}", pair.file);
        let path = dir.join("neighbors").join(&pair.file);
        let (header, a, b) = load_comparison_cache(&path).with_context(|| format!("reading {}", path.display()))?;
        ensure!(
            header.dataset == manifest.dataset && header.model_a == pair.a && header.model_b == pair.b && header.metric == pair.metric,
            "{}: cache header does not match manifest",
            path.display()
        );
        entry.insert_table(a).with_context(|| format!("loading {}", path.display()))?;
        entry.insert_table(b).with_context(|| format!("loading {}", path.display()))?;
    }
    Ok(entry)
}

/// Loads every dataset directory under `root`, in name order.
pub fn load_service(root: &Path) -> anyhow::Result<Service> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("reading cache directory {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    dirs.sort();
    ensure!(!dirs.is_empty(), "no datasets under {}", root.display());
    let entries = dirs.iter().map(|d| read_dataset(d)).collect::<anyhow::Result<Vec<_>>>()?;
    Service::new(entries, Registry::with_builtins())
}
