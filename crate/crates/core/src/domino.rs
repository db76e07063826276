//! Per-object comparison payloads ("dominoes"), ranking, filtering and
//! search over a scored model pair.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::NeighborTable;
use crate::lns::{ratio, ComparisonResult};
use crate::projection::{project_subset, Projection2D};

pub const DEFAULT_PAGE_LIMIT: usize = 20;
pub const SPARKLINE_POINTS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonNeighbor {
    pub token: String,
    pub index: u32,
    pub distance_a: f64,
    pub distance_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueNeighbor {
    pub token: String,
    pub index: u32,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub index: u32,
    pub x: f64,
    pub y: f64,
}

/// The object and its k-NN, placed with one model's global projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodPlot {
    pub object: [f64; 2],
    pub neighbors: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domino {
    pub object: String,
    pub index: u32,
    pub score: f64,
    pub k: usize,
    /// Sorted by distance in model A.
    pub common: Vec<CommonNeighbor>,
    pub unique_a: Vec<UniqueNeighbor>,
    pub unique_b: Vec<UniqueNeighbor>,
    pub plot_a: NeighborhoodPlot,
    pub plot_b: NeighborhoodPlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOrder {
    /// Ascending score.
    #[default]
    Least,
    /// Descending score.
    Most,
}

impl std::str::FromStr for RankOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least" => Ok(RankOrder::Least),
            "most" => Ok(RankOrder::Most),
            other => Err(Error::InvalidConfig(format!("sort must be \"least\" or \"most\", got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    pub least: Vec<u32>,
    pub most: Vec<u32>,
}

impl Ranking {
    pub fn order(&self, order: RankOrder) -> &[u32] {
        match order {
            RankOrder::Least => &self.least,
            RankOrder::Most => &self.most,
        }
    }
}

/// Least-similar first and most-similar first; equal scores fall back to
/// token order in both lists.
pub fn rank_dominoes(scores: &[f64], vocabulary: &[String]) -> Ranking {
    let mut least: Vec<u32> = (0..scores.len() as u32).collect();
    let by_token = |a: &u32, b: &u32| vocabulary[*a as usize].cmp(&vocabulary[*b as usize]);
    least.sort_by(|a, b| scores[*a as usize].total_cmp(&scores[*b as usize]).then_with(|| by_token(a, b)));
    let mut most: Vec<u32> = (0..scores.len() as u32).collect();
    most.sort_by(|a, b| scores[*b as usize].total_cmp(&scores[*a as usize]).then_with(|| by_token(a, b)));
    Ranking { least, most }
}

/// Case-insensitive substring search: exact matches, then prefix matches,
/// then other substrings, each group in token order. An empty query matches
/// nothing.
pub fn search_objects(vocabulary: &[String], query: &str, limit: usize) -> Vec<usize> {
    if query.is_empty() {
        return Vec::new();
    }
    let needle = query.to_lowercase();
    let mut hits: Vec<(u8, &str, usize)> = vocabulary
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            let lower = t.to_lowercase();
            let group = if lower == needle {
                0
            } else if lower.starts_with(&needle) {
                1
            } else if lower.contains(&needle) {
                2
            } else {
                return None;
            };
            Some((group, t.as_str(), i))
        })
        .collect();
    hits.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    hits.into_iter().take(limit).map(|h| h.2).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparkPoint {
    pub rank: usize,
    pub index: u32,
    pub score: f64,
}

/// At most `max_points` evenly spaced samples of a ranked score sequence,
/// always including both ends.
pub fn sparkline(ranked: &[u32], scores: &[f64], max_points: usize) -> Vec<SparkPoint> {
    let n = ranked.len();
    let point = |rank: usize| SparkPoint { rank, index: ranked[rank], score: scores[ranked[rank] as usize] };
    if n <= max_points {
        return (0..n).map(point).collect();
    }
    match max_points {
        0 => Vec::new(),
        1 => vec![point(0)],
        m => (0..m).map(|i| point(i * (n - 1) / (m - 1))).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DominoQuery {
    pub order: RankOrder,
    /// Closed interval.
    pub score_range: Option<(f64, f64)>,
    /// Explicit object indices; an empty selection matches nothing.
    pub selection: Option<Vec<u32>>,
    pub search: Option<String>,
    pub offset: usize,
    pub limit: usize,
}

impl DominoQuery {
    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.score_range {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidConfig(format!("score range [{lo}, {hi}] has lo > hi")));
            }
        }
        if self.limit == 0 {
            return Err(Error::InvalidConfig("limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominoPage {
    pub order: RankOrder,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<Domino>,
}

/// Everything needed to assemble dominoes for one scored model pair.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonView<'a> {
    pub vocabulary: &'a [String],
    pub result: &'a ComparisonResult,
    pub table_a: &'a NeighborTable,
    pub table_b: &'a NeighborTable,
    pub projection_a: &'a Projection2D,
    pub projection_b: &'a Projection2D,
}

impl<'a> ComparisonView<'a> {
    pub fn new(
        vocabulary: &'a [String],
        result: &'a ComparisonResult,
        table_a: &'a NeighborTable,
        table_b: &'a NeighborTable,
        projection_a: &'a Projection2D,
        projection_b: &'a Projection2D,
    ) -> Result<Self> {
        let n = vocabulary.len();
        let sizes = [
            result.scores.len(),
            table_a.len(),
            table_b.len(),
            projection_a.coords.len(),
            projection_b.coords.len(),
        ];
        if sizes.iter().any(|&s| s != n) {
            return Err(Error::Mismatch(format!("vocabulary has {n} objects but parts have {sizes:?}")));
        }
        if result.k > table_a.k_max || result.k > table_b.k_max {
            return Err(Error::InvalidConfig(format!("k = {} exceeds a table's k_max", result.k)));
        }
        Ok(ComparisonView { vocabulary, result, table_a, table_b, projection_a, projection_b })
    }

    pub fn build_domino_for(&self, token: &str) -> Result<Domino> {
        let w = self
            .vocabulary
            .iter()
            .position(|t| t == token)
            .ok_or_else(|| Error::UnknownObject(token.to_owned()))?;
        self.build_domino(w)
    }

    /// Partitions the two k-NN lists of `w` into common and unique
    /// neighbors, each list kept in its model's distance order.
    pub fn build_domino(&self, w: usize) -> Result<Domino> {
        let n = self.vocabulary.len();
        if w >= n {
            return Err(Error::IndexOutOfRange { index: w, len: n });
        }
        let k = self.result.k;
        let (ids_a, dist_a) = (self.table_a.neighbors(w, k), self.table_a.distances(w, k));
        let (ids_b, dist_b) = (self.table_b.neighbors(w, k), self.table_b.distances(w, k));
        let in_a: HashSet<u32> = ids_a.iter().copied().collect();
        let in_b: HashSet<u32> = ids_b.iter().copied().collect();

        let mut common = Vec::new();
        let mut unique_a = Vec::new();
        for (&i, &d) in ids_a.iter().zip(dist_a) {
            let token = self.vocabulary[i as usize].clone();
            if in_b.contains(&i) {
                let pos = ids_b.iter().position(|&j| j == i).expect("member of b");
                common.push(CommonNeighbor { token, index: i, distance_a: d, distance_b: dist_b[pos] });
            } else {
                unique_a.push(UniqueNeighbor { token, index: i, distance: d });
            }
        }
        let unique_b: Vec<UniqueNeighbor> = ids_b
            .iter()
            .zip(dist_b)
            .filter(|(i, _)| !in_a.contains(i))
            .map(|(&i, &d)| UniqueNeighbor { token: self.vocabulary[i as usize].clone(), index: i, distance: d })
            .collect();

        let plot = |proj: &Projection2D, ids: &[u32]| -> Result<NeighborhoodPlot> {
            let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
            let coords = project_subset(proj, &idx)?;
            Ok(NeighborhoodPlot {
                object: project_subset(proj, &[w])?[0],
                neighbors: ids.iter().zip(coords).map(|(&index, [x, y])| PlotPoint { index, x, y }).collect(),
            })
        };

        let union = common.len() + unique_a.len() + unique_b.len();
        Ok(Domino {
            object: self.vocabulary[w].clone(),
            index: w as u32,
            score: ratio(common.len(), union),
            k,
            common,
            unique_a,
            unique_b,
            plot_a: plot(self.projection_a, ids_a)?,
            plot_b: plot(self.projection_b, ids_b)?,
        })
    }

    /// Indices passing every provided criterion, in ranking order.
    pub fn matching(&self, query: &DominoQuery, ranking: &Ranking) -> Result<Vec<u32>> {
        query.validate()?;
        let selection: Option<HashSet<u32>> = query.selection.as_ref().map(|s| s.iter().copied().collect());
        let searched: Option<HashSet<u32>> = query
            .search
            .as_ref()
            .map(|q| search_objects(self.vocabulary, q, usize::MAX).into_iter().map(|i| i as u32).collect());
        let scores = &self.result.scores;
        Ok(ranking
            .order(query.order)
            .iter()
            .copied()
            .filter(|&i| match query.score_range {
                Some((lo, hi)) => (lo..=hi).contains(&scores[i as usize]),
                None => true,
            })
            .filter(|i| selection.as_ref().is_none_or(|s| s.contains(i)))
            .filter(|i| searched.as_ref().is_none_or(|s| s.contains(i)))
            .collect())
    }

    pub fn filter_dominoes(&self, query: &DominoQuery) -> Result<DominoPage> {
        let ranking = rank_dominoes(&self.result.scores, self.vocabulary);
        self.filter_dominoes_ranked(query, &ranking)
    }

    pub fn filter_dominoes_ranked(&self, query: &DominoQuery, ranking: &Ranking) -> Result<DominoPage> {
        if let Some(sel) = &query.selection {
            if let Some(&bad) = sel.iter().find(|&&i| i as usize >= self.vocabulary.len()) {
                return Err(Error::IndexOutOfRange { index: bad as usize, len: self.vocabulary.len() });
            }
        }
        let hits = self.matching(query, ranking)?;
        let items = hits
            .iter()
            .skip(query.offset)
            .take(query.limit)
            .map(|&i| self.build_domino(i as usize))
            .collect::<Result<Vec<_>>>()?;
        Ok(DominoPage { order: query.order, total: hits.len(), offset: query.offset, limit: query.limit, items })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AlignedModel;
    use crate::knn::knn_all;
    use crate::lns::compute_lns;
    use crate::metric::Metric;
    use crate::projection::pca_project;

    fn vocab(tokens: &[&str]) -> Vec<String> {
        tokens.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn ranking_examples() {
        let v = vocab(&["a", "b", "c"]);
        let r = rank_dominoes(&[0.1, 0.9, 0.5], &v);
        assert_eq!(r.least, [0, 2, 1]);
        assert_eq!(r.most, [1, 2, 0]);

        let v = vocab(&["c", "a", "b"]);
        let r = rank_dominoes(&[0.5, 0.5, 0.5], &v);
        assert_eq!(r.least, [1, 2, 0]);
        assert_eq!(r.most, [1, 2, 0]);
    }

    #[test]
    fn search_groups() {
        let v = vocab(&["cat", "demean", "mean", "meaning"]);
        let hits = |q: &str| search_objects(&v, q, 10).into_iter().map(|i| v[i].as_str()).collect::<Vec<_>>();
        assert_eq!(hits("mean"), ["mean", "meaning", "demean"]);
        assert_eq!(hits("MEAN"), ["mean", "meaning", "demean"]);
        assert!(hits("zzz").is_empty());
        assert!(hits("").is_empty());
        assert_eq!(search_objects(&v, "mean", 1), [2]);
    }

    #[test]
    fn sparkline_sampling() {
        let ranked: Vec<u32> = (0..1000).collect();
        let scores: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let s = sparkline(&ranked, &scores, SPARKLINE_POINTS);
        assert_eq!(s.len(), 500);
        assert_eq!(s[0].rank, 0);
        assert_eq!(s[499].rank, 999);
        assert!(s.windows(2).all(|w| w[0].rank < w[1].rank));
        assert_eq!(sparkline(&ranked[..10], &scores, 500).len(), 10);
    }

    /// 1-D toy pair: B moves the last object from 100 to 2.5.
    fn toy() -> (Vec<String>, ComparisonResult, NeighborTable, NeighborTable, Projection2D, Projection2D) {
        let v = vocab(&["a", "b", "c", "d", "e", "f"]);
        let a = AlignedModel::new("toy", "A", 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        let b = AlignedModel::new("toy", "B", 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 2.5]).unwrap();
        let ta = knn_all(&a, &Metric::Euclidean, 5).unwrap();
        let tb = knn_all(&b, &Metric::Euclidean, 5).unwrap();
        let r = compute_lns(&ta.truncated(2).unwrap(), &tb.truncated(2).unwrap(), 2).unwrap();
        (v, r, ta, tb, pca_project(&a).unwrap(), pca_project(&b).unwrap())
    }

    #[test]
    fn toy_domino_partition() {
        let (v, r, ta, tb, pa, pb) = toy();
        let view = ComparisonView::new(&v, &r, &ta, &tb, &pa, &pb).unwrap();
        let d = view.build_domino_for("f").unwrap();
        // A: f=100 is nearest to e(4), d(3); B: f=2.5 is nearest to c(2), d(3)
        assert_eq!(d.common.iter().map(|c| c.token.as_str()).collect::<Vec<_>>(), ["d"]);
        assert_eq!((d.common[0].distance_a, d.common[0].distance_b), (97.0, 0.5));
        assert_eq!(d.unique_a.iter().map(|c| c.token.as_str()).collect::<Vec<_>>(), ["e"]);
        assert_eq!(d.unique_b.iter().map(|c| c.token.as_str()).collect::<Vec<_>>(), ["c"]);
        assert_eq!(d.score, 1.0 / 3.0);
        assert_eq!(d.score, r.scores[5]);
        assert_eq!(d.plot_a.object, pa.coords[5]);
        assert_eq!(d.plot_b.neighbors.iter().map(|p| p.index).collect::<Vec<_>>(), [2, 3]);
        assert!(matches!(view.build_domino_for("zz"), Err(Error::UnknownObject(_))));
        assert!(view.build_domino(6).is_err());
    }

    #[test]
    fn self_and_disjoint_dominoes() {
        let (v, _, ta, _, pa, _) = toy();
        let same = compute_lns(&ta, &ta, 3).unwrap();
        let view = ComparisonView::new(&v, &same, &ta, &ta, &pa, &pa).unwrap();
        for w in 0..6 {
            let d = view.build_domino(w).unwrap();
            assert!(d.unique_a.is_empty() && d.unique_b.is_empty());
            assert_eq!((d.common.len(), d.score), (3, 1.0));
        }

        // B reverses A's neighbor order: with k = 1 the points at the ends
        // of the line swap their single neighbor
        let v4 = vocab(&["p", "q", "r", "s"]);
        let a = AlignedModel::new("t", "A", 1, vec![0.0, 1.0, 10.0, 30.0]).unwrap();
        let b = AlignedModel::new("t", "B", 1, vec![0.0, 30.0, 10.0, 1.0]).unwrap();
        let (ta, tb) = (knn_all(&a, &Metric::Euclidean, 1).unwrap(), knn_all(&b, &Metric::Euclidean, 1).unwrap());
        let r = compute_lns(&ta, &tb, 1).unwrap();
        let (pa, pb) = (pca_project(&a).unwrap(), pca_project(&b).unwrap());
        let view = ComparisonView::new(&v4, &r, &ta, &tb, &pa, &pb).unwrap();
        let d = view.build_domino(0).unwrap();
        assert!(d.common.is_empty());
        assert_eq!((d.unique_a.len(), d.unique_b.len(), d.score), (1, 1, 0.0));
    }

    #[test]
    fn filters_intersect() {
        let (v, r, ta, tb, pa, pb) = toy();
        let view = ComparisonView::new(&v, &r, &ta, &tb, &pa, &pb).unwrap();
        let base = DominoQuery { limit: 100, ..Default::default() };

        let all = view.filter_dominoes(&DominoQuery { score_range: Some((0.0, 1.0)), ..base.clone() }).unwrap();
        assert_eq!(all.total, 6);

        let empty = view.filter_dominoes(&DominoQuery { selection: Some(vec![]), ..base.clone() }).unwrap();
        assert_eq!(empty.total, 0);

        let sel = view
            .filter_dominoes(&DominoQuery { selection: Some(vec![0, 5]), search: Some("F".into()), ..base.clone() })
            .unwrap();
        assert_eq!(sel.items.iter().map(|d| d.object.as_str()).collect::<Vec<_>>(), ["f"]);

        assert!(view.filter_dominoes(&DominoQuery { score_range: Some((0.6, 0.2)), ..base.clone() }).is_err());
        assert!(view.filter_dominoes(&DominoQuery { limit: 0, ..base.clone() }).is_err());
        assert!(view.filter_dominoes(&DominoQuery { selection: Some(vec![9]), ..base.clone() }).is_err());

        let page = view.filter_dominoes(&DominoQuery { offset: 4, limit: 5, ..base }).unwrap();
        assert_eq!((page.total, page.items.len()), (6, 2));
    }

    #[test]
    fn rank_order_parse() {
        assert_eq!("least".parse::<RankOrder>().unwrap(), RankOrder::Least);
        assert_eq!("most".parse::<RankOrder>().unwrap(), RankOrder::Most);
        assert!("up".parse::<RankOrder>().is_err());
    }
}
