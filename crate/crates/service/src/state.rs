//! Dataset registry and the read-only query surface behind the HTTP API.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use embdiff_core::domino::{sparkline, ComparisonView, DominoQuery, RankOrder, SparkPoint, DEFAULT_PAGE_LIMIT, SPARKLINE_POINTS};
use embdiff_core::lns::{compute_lns_with, similarity_histogram, DEFAULT_BINS, DEFAULT_K};
use embdiff_core::{
    knn_all, pca_project, rank_dominoes, search_objects, ComparisonResult, Dataset, Domino, HistogramBin,
    NeighborTable, Projection2D, Registry,
};
use serde::Serialize;
use thiserror::Error;

pub const MAX_PAGE_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl From<embdiff_core::Error> for ServiceError {
    fn from(e: embdiff_core::Error) -> Self {
        use embdiff_core::Error as E;
        match e {
            E::UnknownObject(_) => ServiceError::NotFound(e.to_string()),
            E::InvalidConfig(_) | E::UnknownMetric(_) | E::IndexOutOfRange { .. } | E::ZeroNorm { .. } => {
                ServiceError::BadRequest(e.to_string())
            }
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;

type TableCell = Arc<OnceLock<Result<Arc<NeighborTable>, TableError>>>;

/// Failed computations are cached too, keeping their status class.
#[derive(Debug, Clone)]
struct TableError {
    bad_request: bool,
    message: String,
}

impl From<TableError> for ServiceError {
    fn from(e: TableError) -> Self {
        if e.bad_request {
            ServiceError::BadRequest(e.message)
        } else {
            ServiceError::Internal(e.message)
        }
    }
}

pub struct DatasetEntry {
    pub dataset: Dataset,
    pub k_max: usize,
    pub projections: BTreeMap<String, Projection2D>,
    tables: Mutex<HashMap<(String, String), TableCell>>,
}

impl DatasetEntry {
    /// Fits a projection for every model; neighbor tables are computed on
    /// first use.
    pub fn new(dataset: Dataset, k_max: usize) -> anyhow::Result<Self> {
        let projections = dataset
            .models
            .iter()
            .map(|m| Ok((m.name.clone(), pca_project(m)?)))
            .collect::<embdiff_core::Result<BTreeMap<_, _>>>()?;
        Self::with_projections(dataset, k_max, projections)
    }

    pub fn with_projections(
        dataset: Dataset,
        k_max: usize,
        projections: BTreeMap<String, Projection2D>,
    ) -> anyhow::Result<Self> {
        anyhow::ensure!(dataset.models.len() >= 2, "dataset {:?} needs at least 2 models", dataset.id);
        anyhow::ensure!(
            k_max >= 1 && k_max < dataset.vocabulary.len(),
            "k_max {k_max} must lie in [1, {}]",
            dataset.vocabulary.len() - 1
        );
        for m in &dataset.models {
            anyhow::ensure!(projections.contains_key(&m.name), "no projection for model {:?}", m.name);
        }
        Ok(DatasetEntry { dataset, k_max, projections, tables: Mutex::new(HashMap::new()) })
    }

    /// Installs a precomputed table; later lookups never recompute it.
    pub fn insert_table(&self, table: NeighborTable) -> anyhow::Result<()> {
        anyhow::ensure!(table.dataset == self.dataset.id, "table belongs to dataset {:?}", table.dataset);
        anyhow::ensure!(self.dataset.model(&table.model).is_some(), "unknown model {:?}", table.model);
        anyhow::ensure!(table.len() == self.dataset.vocabulary.len(), "table size does not match vocabulary");
        anyhow::ensure!(table.k_max == self.k_max, "table k_max {} != dataset k_max {}", table.k_max, self.k_max);
        let cell: TableCell = Arc::new(OnceLock::new());
        let key = (table.model.clone(), table.metric.clone());
        let _ = cell.set(Ok(Arc::new(table)));
        self.tables.lock().unwrap().insert(key, cell);
        Ok(())
    }

    pub fn cached_tables(&self) -> Vec<Arc<NeighborTable>> {
        let tables = self.tables.lock().unwrap();
        let mut out: Vec<Arc<NeighborTable>> =
            tables.values().filter_map(|c| c.get().and_then(|r| r.as_ref().ok()).cloned()).collect();
        out.sort_by(|a, b| (&a.model, &a.metric).cmp(&(&b.model, &b.metric)));
        out
    }
}

pub struct Service {
    datasets: BTreeMap<String, DatasetEntry>,
    registry: Registry,
    knn_runs: AtomicUsize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub id: String,
    pub models: Vec<ModelInfo>,
    pub vocabulary_size: usize,
    pub k_max: usize,
    pub default_k: usize,
    pub metrics: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetsResponse {
    pub datasets: Vec<DatasetInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResponse<'a> {
    pub dataset: &'a str,
    pub model: &'a str,
    pub method: &'a str,
    pub explained_variance: [f64; 2],
    pub tokens: &'a [String],
    pub coords: &'a [[f64; 2]],
}

#[derive(Debug, Clone, Serialize)]
pub struct Sparklines {
    pub least: Vec<SparkPoint>,
    pub most: Vec<SparkPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareResponse {
    pub dataset: String,
    pub model_a: String,
    pub model_b: String,
    pub metric: String,
    pub k: usize,
    pub k_max: usize,
    pub vocabulary_size: usize,
    pub scores: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
    pub sparklines: Sparklines,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominoesResponse {
    pub dataset: String,
    pub model_a: String,
    pub model_b: String,
    pub metric: String,
    pub k: usize,
    pub order: RankOrder,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<Domino>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchHit {
    pub token: String,
    pub index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResponse {
    pub dataset: String,
    pub query: String,
    pub results: Vec<SearchHit>,
}

/// Identifies one scored model pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairParams {
    pub dataset: String,
    pub model_a: String,
    pub model_b: String,
    pub k: usize,
    pub metric: String,
}

impl PairParams {
    pub fn new(dataset: &str, model_a: &str, model_b: &str, k: usize, metric: &str) -> Self {
        PairParams {
            dataset: dataset.into(),
            model_a: model_a.into(),
            model_b: model_b.into(),
            k,
            metric: metric.into(),
        }
    }
}

struct Scored {
    result: ComparisonResult,
    table_a: Arc<NeighborTable>,
    table_b: Arc<NeighborTable>,
}

impl Service {
    pub fn new(entries: Vec<DatasetEntry>, registry: Registry) -> anyhow::Result<Self> {
        let mut datasets = BTreeMap::new();
        for e in entries {
            let id = e.dataset.id.clone();
            anyhow::ensure!(datasets.insert(id.clone(), e).is_none(), "dataset {id:?} registered twice");
        }
        anyhow::ensure!(!datasets.is_empty(), "no datasets registered");
        Ok(Service { datasets, registry, knn_runs: AtomicUsize::new(0) })
    }

    /// Live service over in-memory datasets; every table is computed on
    /// demand.
    pub fn from_datasets(datasets: Vec<Dataset>, k_max: usize) -> anyhow::Result<Self> {
        let entries = datasets.into_iter().map(|d| DatasetEntry::new(d, k_max)).collect::<anyhow::Result<_>>()?;
        Self::new(entries, Registry::with_builtins())
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// How many neighbor tables this service has computed itself.
    pub fn knn_runs(&self) -> usize {
        self.knn_runs.load(Ordering::SeqCst)
    }

    pub fn entry(&self, id: &str) -> ServiceResult<&DatasetEntry> {
        self.datasets.get(id).ok_or_else(|| ServiceError::NotFound(format!("unknown dataset {id:?}")))
    }

    pub fn entries(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.datasets.values()
    }

    /// Neighbor table at `k_max` for one model and metric. Concurrent
    /// callers for the same key share a single computation.
    pub fn table(&self, dataset: &str, model: &str, metric: &str) -> ServiceResult<Arc<NeighborTable>> {
        let entry = self.entry(dataset)?;
        let aligned = entry
            .dataset
            .model(model)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown model {model:?} in dataset {dataset:?}")))?;
        let distance = self.registry.metric(metric)?;
        let cell = entry
            .tables
            .lock()
            .unwrap()
            .entry((model.to_owned(), metric.to_owned()))
            .or_default()
            .clone();
        let result = cell.get_or_init(|| {
            self.knn_runs.fetch_add(1, Ordering::SeqCst);
            knn_all(aligned, distance.as_ref(), entry.k_max).map(Arc::new).map_err(|e| match ServiceError::from(e) {
                ServiceError::BadRequest(message) => TableError { bad_request: true, message },
                other => TableError { bad_request: false, message: other.to_string() },
            })
        });
        result.clone().map_err(|e| e.into())
    }

    pub fn datasets(&self) -> DatasetsResponse {
        let metrics: Vec<String> = self.registry.metric_names().map(str::to_owned).collect();
        DatasetsResponse {
            datasets: self
                .datasets
                .values()
                .map(|e| DatasetInfo {
                    id: e.dataset.id.clone(),
                    models: e.dataset.models.iter().map(|m| ModelInfo { name: m.name.clone(), dim: m.dim }).collect(),
                    vocabulary_size: e.dataset.vocabulary.len(),
                    k_max: e.k_max,
                    default_k: DEFAULT_K.min(e.k_max),
                    metrics: metrics.clone(),
                })
                .collect(),
        }
    }

    pub fn projection(&self, dataset: &str, model: &str) -> ServiceResult<ProjectionResponse<'_>> {
        let entry = self.entry(dataset)?;
        let p = entry
            .projections
            .get(model)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown model {model:?} in dataset {dataset:?}")))?;
        Ok(ProjectionResponse {
            dataset: &entry.dataset.id,
            model: &p.model,
            method: &p.method,
            explained_variance: p.explained_variance,
            tokens: &entry.dataset.vocabulary,
            coords: &p.coords,
        })
    }

    fn score(&self, params: &PairParams) -> ServiceResult<Scored> {
        let entry = self.entry(&params.dataset)?;
        if params.k == 0 || params.k > entry.k_max {
            return Err(ServiceError::BadRequest(format!("k = {} outside [1, {}]", params.k, entry.k_max)));
        }
        let table_a = self.table(&params.dataset, &params.model_a, &params.metric)?;
        let table_b = self.table(&params.dataset, &params.model_b, &params.metric)?;
        let jaccard = self.registry.similarity("jaccard")?;
        let result = compute_lns_with(&table_a, &table_b, params.k, jaccard.as_ref())?;
        Ok(Scored { result, table_a, table_b })
    }

    pub fn compare(&self, params: &PairParams, bins: usize) -> ServiceResult<CompareResponse> {
        let entry = self.entry(&params.dataset)?;
        let Scored { result, .. } = self.score(params)?;
        let histogram = if bins == DEFAULT_BINS { result.histogram.clone() } else { similarity_histogram(&result.scores, bins)? };
        let ranking = rank_dominoes(&result.scores, &entry.dataset.vocabulary);
        Ok(CompareResponse {
            dataset: result.dataset.clone(),
            model_a: result.model_a.clone(),
            model_b: result.model_b.clone(),
            metric: result.metric.clone(),
            k: result.k,
            k_max: entry.k_max,
            vocabulary_size: entry.dataset.vocabulary.len(),
            sparklines: Sparklines {
                least: sparkline(&ranking.least, &result.scores, SPARKLINE_POINTS),
                most: sparkline(&ranking.most, &result.scores, SPARKLINE_POINTS),
            },
            histogram,
            scores: result.scores,
        })
    }

    fn with_view<T>(&self, params: &PairParams, f: impl FnOnce(&ComparisonView<'_>) -> ServiceResult<T>) -> ServiceResult<T> {
        let entry = self.entry(&params.dataset)?;
        let scored = self.score(params)?;
        let view = ComparisonView::new(
            &entry.dataset.vocabulary,
            &scored.result,
            &scored.table_a,
            &scored.table_b,
            &entry.projections[&params.model_a],
            &entry.projections[&params.model_b],
        )?;
        f(&view)
    }

    pub fn dominoes(&self, params: &PairParams, query: &DominoQuery) -> ServiceResult<DominoesResponse> {
        if query.limit > MAX_PAGE_LIMIT {
            return Err(ServiceError::BadRequest(format!("limit {} exceeds {MAX_PAGE_LIMIT}", query.limit)));
        }
        self.with_view(params, |view| {
            let page = view.filter_dominoes(query)?;
            Ok(DominoesResponse {
                dataset: params.dataset.clone(),
                model_a: params.model_a.clone(),
                model_b: params.model_b.clone(),
                metric: params.metric.clone(),
                k: params.k,
                order: page.order,
                total: page.total,
                offset: page.offset,
                limit: page.limit,
                items: page.items,
            })
        })
    }

    pub fn domino(&self, params: &PairParams, token: &str) -> ServiceResult<Domino> {
        self.with_view(params, |view| Ok(view.build_domino_for(token)?))
    }

    pub fn search(&self, dataset: &str, query: &str, limit: usize) -> ServiceResult<SearchResponse> {
        let entry = self.entry(dataset)?;
        let vocab = &entry.dataset.vocabulary;
        Ok(SearchResponse {
            dataset: dataset.to_owned(),
            query: query.to_owned(),
            results: search_objects(vocab, query, limit)
                .into_iter()
                .map(|index| SearchHit { token: vocab[index].clone(), index })
                .collect(),
        })
    }
}

pub fn default_query() -> DominoQuery {
    DominoQuery { limit: DEFAULT_PAGE_LIMIT, ..Default::default() }
}
