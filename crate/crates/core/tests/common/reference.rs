//! Naive O(N²) reference: scalar sums, full sorts, hash sets. Shares no
//! code with the library's distance kernels or neighbor selection.
#![allow(dead_code)]

use std::collections::HashSet;

pub fn cosine(u: &[f32], v: &[f32]) -> f64 {
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    (1.0 - uv / (uu.sqrt() * vv.sqrt())).clamp(0.0, 2.0)
}

pub fn euclidean(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum::<f64>().sqrt()
}

pub fn dist(metric: &str, u: &[f32], v: &[f32]) -> f64 {
    match metric {
        "cosine" => cosine(u, v),
        "euclidean" => euclidean(u, v),
        other => panic!("no reference for {other}"),
    }
}

/// All objects but `w`, sorted by (distance, index), truncated to `k`.
pub fn knn(rows: &[&[f32]], metric: &str, w: usize, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> =
        (0..rows.len()).filter(|&c| c != w).map(|c| (c, dist(metric, rows[w], rows[c]))).collect();
    all.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)));
    all.truncate(k);
    all
}

pub fn rows(data: &[f32], dim: usize) -> Vec<&[f32]> {
    data.chunks_exact(dim).collect()
}

pub fn neighbor_set(rows: &[&[f32]], metric: &str, w: usize, k: usize) -> HashSet<usize> {
    knn(rows, metric, w, k).into_iter().map(|p| p.0).collect()
}

pub fn lns(a: &[&[f32]], b: &[&[f32]], metric: &str, k: usize) -> Vec<f64> {
    (0..a.len())
        .map(|w| {
            let sa = neighbor_set(a, metric, w, k);
            let sb = neighbor_set(b, metric, w, k);
            sa.intersection(&sb).count() as f64 / sa.union(&sb).count() as f64
        })
        .collect()
}

/// (common, unique to a, unique to b) as index sets.
pub fn partition(a: &[&[f32]], b: &[&[f32]], metric: &str, w: usize, k: usize) -> [HashSet<usize>; 3] {
    let sa = neighbor_set(a, metric, w, k);
    let sb = neighbor_set(b, metric, w, k);
    [
        sa.intersection(&sb).copied().collect(),
        sa.difference(&sb).copied().collect(),
        sb.difference(&sa).copied().collect(),
    ]
}
