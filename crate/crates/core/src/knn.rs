//! Exact k-nearest neighbors for every object of a model.

use std::cmp::Ordering;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::AlignedModel;
use crate::metric::Distance;

const QUERY_BLOCK: usize = 32;
const CANDIDATE_BLOCK: usize = 512;

/// Per-object neighbor lists, `k_max` entries each, self excluded.
/// Lists are ordered by ascending distance, then ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub dataset: String,
    pub model: String,
    pub metric: String,
    pub k_max: usize,
    /// Row-major `n × k_max`.
    pub indices: Vec<u32>,
    pub distances: Vec<f64>,
}

impl NeighborTable {
    /// Assembles a table from raw parts, checking shape and list order.
    pub fn from_parts(
        dataset: impl Into<String>,
        model: impl Into<String>,
        metric: impl Into<String>,
        k_max: usize,
        indices: Vec<u32>,
        distances: Vec<f64>,
    ) -> Result<Self> {
        if k_max == 0 || indices.len() != distances.len() || !indices.len().is_multiple_of(k_max) {
            return Err(Error::Mismatch(format!(
                "{} indices and {} distances do not form lists of {k_max}",
                indices.len(),
                distances.len()
            )));
        }
        let n = indices.len() / k_max;
        for w in 0..n {
            let ids = &indices[w * k_max..(w + 1) * k_max];
            let ds = &distances[w * k_max..(w + 1) * k_max];
            if ids.iter().any(|&i| i as usize >= n || i as usize == w) {
                return Err(Error::Mismatch(format!("neighbor list of object {w} has an invalid index")));
            }
            let ordered = ids.windows(2).zip(ds.windows(2)).all(|(i, d)| {
                neighbor_order((d[0], i[0]), (d[1], i[1])) == Ordering::Less
            });
            if !ordered || ds.iter().any(|d| d.is_nan() || *d < 0.0) {
                return Err(Error::Mismatch(format!("neighbor list of object {w} is not sorted")));
            }
        }
        Ok(NeighborTable {
            dataset: dataset.into(),
            model: model.into(),
            metric: metric.into(),
            k_max,
            indices,
            distances,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.k_max
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The first `k` neighbor indices of `w`.
    pub fn neighbors(&self, w: usize, k: usize) -> &[u32] {
        let k = k.min(self.k_max);
        &self.indices[w * self.k_max..w * self.k_max + k]
    }

    pub fn distances(&self, w: usize, k: usize) -> &[f64] {
        let k = k.min(self.k_max);
        &self.distances[w * self.k_max..w * self.k_max + k]
    }

    /// Copy limited to the first `k` neighbors of every object.
    pub fn truncated(&self, k: usize) -> Result<NeighborTable> {
        if k == 0 || k > self.k_max {
            return Err(Error::InvalidConfig(format!("k = {k} outside [1, {}]", self.k_max)));
        }
        let n = self.len();
        let mut indices = Vec::with_capacity(n * k);
        let mut distances = Vec::with_capacity(n * k);
        for w in 0..n {
            indices.extend_from_slice(self.neighbors(w, k));
            distances.extend_from_slice(self.distances(w, k));
        }
        Ok(NeighborTable {
            dataset: self.dataset.clone(),
            model: self.model.clone(),
            metric: self.metric.clone(),
            k_max: k,
            indices,
            distances,
        })
    }
}

#[inline]
fn neighbor_order(a: (f64, u32), b: (f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Computes the `k_max` nearest neighbors of every object by exhaustive
/// search. Queries are split into blocks that may run on different workers;
/// blocks are merged in index order so the table does not depend on the
/// schedule.
pub fn knn_all(model: &AlignedModel, metric: &dyn Distance, k_max: usize) -> Result<NeighborTable> {
    let n = model.len();
    if k_max == 0 || k_max + 1 > n {
        return Err(Error::InvalidConfig(format!("k_max = {k_max} needs 1 ≤ k_max ≤ {} (objects − 1)", n.saturating_sub(1))));
    }
    let prepared = metric.prepare(model)?;
    let blocks = n.div_ceil(QUERY_BLOCK);

    let run_block = |b: usize| -> Result<(Vec<u32>, Vec<f64>)> {
        let queries = b * QUERY_BLOCK..((b + 1) * QUERY_BLOCK).min(n);
        let mut rows = vec![0.0f64; queries.len() * n];
        let mut start = 0;
        while start < n {
            let end = (start + CANDIDATE_BLOCK).min(n);
            for (qi, q) in queries.clone().enumerate() {
                prepared.fill(q, start..end, &mut rows[qi * n + start..qi * n + end])?;
            }
            start = end;
        }

        let mut indices = Vec::with_capacity(queries.len() * k_max);
        let mut distances = Vec::with_capacity(queries.len() * k_max);
        let mut keyed: Vec<(f64, u32)> = Vec::with_capacity(n - 1);
        for (qi, q) in queries.enumerate() {
            keyed.clear();
            keyed.extend(
                rows[qi * n..(qi + 1) * n]
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != q)
                    .map(|(c, &d)| (d, c as u32)),
            );
            if k_max < keyed.len() {
                keyed.select_nth_unstable_by(k_max - 1, |a, b| neighbor_order(*a, *b));
                keyed.truncate(k_max);
            }
            keyed.sort_unstable_by(|a, b| neighbor_order(*a, *b));
            for &(d, c) in keyed.iter() {
                if d.is_nan() {
                    return Err(Error::Degenerate(format!("{} distance from object {q} is NaN", metric.name())));
                }
                indices.push(c);
                distances.push(d);
            }
        }
        Ok((indices, distances))
    };

    #[cfg(feature = "parallel")]
    let parts: Vec<(Vec<u32>, Vec<f64>)> = (0..blocks).into_par_iter().map(run_block).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(Vec<u32>, Vec<f64>)> = (0..blocks).map(run_block).collect::<Result<_>>()?;

    let mut indices = Vec::with_capacity(n * k_max);
    let mut distances = Vec::with_capacity(n * k_max);
    for (i, d) in parts {
        indices.extend(i);
        distances.extend(d);
    }
    Ok(NeighborTable {
        dataset: model.dataset.clone(),
        model: model.name.clone(),
        metric: metric.name().to_owned(),
        k_max,
        indices,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Metric;

    fn model(dim: usize, data: Vec<f32>) -> AlignedModel {
        AlignedModel::new("d", "m", dim, data).unwrap()
    }

    /// Exhaustive sort of every pairwise distance.
    fn oracle(m: &AlignedModel, metric: Metric, q: usize, k: usize) -> Vec<(u32, f64)> {
        let mut all: Vec<(u32, f64)> = (0..m.len())
            .filter(|&c| c != q)
            .map(|c| (c as u32, metric.distance(m.row(q), m.row(c)).unwrap()))
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn one_dimensional_example() {
        let m = model(1, vec![0.0, 1.0, 2.0, 10.0]);
        let t = knn_all(&m, &Metric::Euclidean, 2).unwrap();
        assert_eq!(t.neighbors(0, 2), &[1, 2]);
        assert_eq!(t.distances(0, 2), &[1.0, 2.0]);
        for q in 0..4 {
            let want = oracle(&m, Metric::Euclidean, q, 2);
            assert_eq!(t.neighbors(q, 2), want.iter().map(|p| p.0).collect::<Vec<_>>().as_slice());
        }
        assert_eq!(t.neighbors(3, 2), &[2, 1]);
    }

    #[test]
    fn full_neighborhood_is_everything_but_self() {
        let m = model(2, vec![0.0, 1.0, 3.0, 2.0, -1.0, 4.0, 7.0, 7.0, 0.5, 0.5]);
        for metric in Metric::ALL {
            let t = knn_all(&m, &metric, 4).unwrap();
            for w in 0..5 {
                let mut got: Vec<u32> = t.neighbors(w, 4).to_vec();
                got.sort();
                let want: Vec<u32> = (0..5).filter(|&i| i != w as u32).collect();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn ties_break_by_ascending_index() {
        // indices 2 and 5 share a vector; 0, 1, 3 and 4 sit at equal distance
        let data = vec![5.0, 6.0, 4.0, 5.0, 5.0, 5.0, 6.0, 5.0, 5.0, 4.0, 5.0, 5.0];
        let m = model(2, data);
        let t = knn_all(&m, &Metric::Euclidean, 5).unwrap();
        assert_eq!(t.neighbors(2, 5), &[5, 0, 1, 3, 4]);
        assert_eq!(t.distances(2, 1), &[0.0]);
        assert_eq!(t.neighbors(5, 1), &[2]);
    }

    #[test]
    fn truncation_matches_direct_computation() {
        let data: Vec<f32> = (0..40 * 3).map(|i| ((i * 7919 % 101) as f32) / 13.0 - 3.0).collect();
        let m = model(3, data);
        for metric in Metric::ALL {
            let full = knn_all(&m, &metric, 20).unwrap();
            for k in [1, 5, 19] {
                assert_eq!(full.truncated(k).unwrap(), knn_all(&m, &metric, k).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_k_max() {
        let m = model(1, vec![0.0, 1.0, 2.0]);
        assert!(knn_all(&m, &Metric::Euclidean, 3).is_err());
        assert!(knn_all(&m, &Metric::Euclidean, 0).is_err());
        let t = knn_all(&m, &Metric::Euclidean, 2).unwrap();
        assert!(t.truncated(3).is_err());
    }

    #[test]
    fn from_parts_validates_order() {
        assert!(NeighborTable::from_parts("d", "m", "euclidean", 1, vec![1, 0], vec![1.0, 1.0]).is_ok());
        assert!(NeighborTable::from_parts("d", "m", "euclidean", 2, vec![2, 1, 0, 2, 0, 1], vec![1.0, 0.5, 1.0, 2.0, 1.0, 1.0]).is_err());
        assert!(NeighborTable::from_parts("d", "m", "euclidean", 1, vec![0, 0], vec![1.0, 1.0]).is_err());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn independent_of_worker_count() {
        let data: Vec<f32> = (0..300 * 5).map(|i| ((i * 104729 % 997) as f32) / 97.0).collect();
        let m = model(5, data);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| knn_all(&m, &Metric::Cosine, 30).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.indices, four.indices);
        assert!(one.distances.iter().zip(&four.distances).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
