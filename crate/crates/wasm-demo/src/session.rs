//! Demo state, independent of the JS bindings so it can be tested natively.

use std::collections::HashMap;
use std::io::Cursor;

use embdiff_core::domino::DEFAULT_PAGE_LIMIT;
use embdiff_core::ingest::parse_embedding;
use embdiff_core::lns::DEFAULT_K_MAX;
use embdiff_core::synthetic::perturbed_pair;
use embdiff_core::{
    compute_lns, intersect_vocabulary, knn_all, pca_project, rank_dominoes, ComparisonResult, ComparisonView, Dataset,
    DominoQuery, Error, Format, Metric, NeighborTable, Projection2D, RankOrder, Ranking, Result,
};
use serde_json::json;

pub struct DemoSession {
    dataset: Dataset,
    k_max: usize,
    projections: [Projection2D; 2],
    tables: HashMap<Metric, [NeighborTable; 2]>,
    current: Option<(ComparisonResult, Ranking)>,
    perturbed: Vec<usize>,
}

impl DemoSession {
    fn new(dataset: Dataset, perturbed: Vec<usize>) -> Result<Self> {
        if dataset.models.len() != 2 {
            return Err(Error::InvalidConfig("the demo compares exactly two models".into()));
        }
        let n = dataset.vocabulary.len();
        if n < 3 {
            return Err(Error::InvalidConfig(format!("need at least 3 shared objects, got {n}")));
        }
        let projections = [pca_project(&dataset.models[0])?, pca_project(&dataset.models[1])?];
        Ok(DemoSession { k_max: DEFAULT_K_MAX.min(n - 1), dataset, projections, tables: HashMap::new(), current: None, perturbed })
    }

    /// Seeded pair where `perturbed` objects are moved far away in model B.
    pub fn synthetic(seed: u64, n: usize, dim: usize, perturbed: usize) -> Result<Self> {
        let pair = perturbed_pair(seed, n, dim, perturbed)?;
        Self::new(pair.dataset, pair.perturbed)
    }

    /// Two GloVe-style text blobs (`token v1 v2 ...` per line).
    pub fn from_text(a: &str, b: &str) -> Result<Self> {
        let models = [("A", a), ("B", b)]
            .iter()
            .map(|(name, text)| parse_embedding(Cursor::new(text.as_bytes()), Format::GloveText, name))
            .collect::<Result<Vec<_>>>()?;
        Self::new(intersect_vocabulary(&models, "pasted")?, Vec::new())
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    fn tables(&mut self, metric: Metric) -> Result<&[NeighborTable; 2]> {
        if !self.tables.contains_key(&metric) {
            let pair = [knn_all(&self.dataset.models[0], &metric, self.k_max)?, knn_all(&self.dataset.models[1], &metric, self.k_max)?];
            self.tables.insert(metric, pair);
        }
        Ok(&self.tables[&metric])
    }

    /// Scores every object and returns scores, histogram and the object
    /// list.
    pub fn compare(&mut self, k: usize, metric: &str) -> Result<String> {
        let metric: Metric = metric.parse()?;
        let [a, b] = self.tables(metric)?;
        let result = compute_lns(a, b, k)?;
        let ranking = rank_dominoes(&result.scores, &self.dataset.vocabulary);
        let body = json!({
            "k": k,
            "k_max": self.k_max,
            "metric": metric.as_str(),
            "tokens": self.dataset.vocabulary,
            "scores": result.scores,
            "histogram": result.histogram,
            "perturbed": self.perturbed,
        });
        self.current = Some((result, ranking));
        Ok(body.to_string())
    }

    pub fn projection(&self, which: usize) -> Result<String> {
        let p = self.projections.get(which).ok_or(Error::IndexOutOfRange { index: which, len: 2 })?;
        Ok(json!({ "model": p.model, "explained_variance": p.explained_variance, "coords": p.coords }).to_string())
    }

    fn view(&self) -> Result<(ComparisonView<'_>, &Ranking)> {
        let (result, ranking) = self.current.as_ref().ok_or_else(|| Error::InvalidConfig("call compare first".into()))?;
        let [a, b] = &self.tables[&result.metric.parse::<Metric>()?];
        let view = ComparisonView::new(&self.dataset.vocabulary, result, a, b, &self.projections[0], &self.projections[1])?;
        Ok((view, ranking))
    }

    /// One page of dominoes from the latest comparison. `lo > hi` or a NaN
    /// bound means no score filter.
    pub fn dominoes(&self, order: &str, lo: f64, hi: f64, selection: Option<Vec<u32>>, limit: usize) -> Result<String> {
        let (view, ranking) = self.view()?;
        let query = DominoQuery {
            order: order.parse::<RankOrder>()?,
            score_range: (lo <= hi).then_some((lo, hi)),
            selection,
            search: None,
            offset: 0,
            limit: if limit == 0 { DEFAULT_PAGE_LIMIT } else { limit },
        };
        Ok(serde_json::to_string(&view.filter_dominoes_ranked(&query, ranking)?)?)
    }

    pub fn domino(&self, index: usize) -> Result<String> {
        let (view, _) = self.view()?;
        Ok(serde_json::to_string(&view.build_domino(index)?)?)
    }
}
