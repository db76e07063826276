//! 2-D projections of an embedding space. PCA is the built-in projector.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AlignedModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub model: String,
    pub method: String,
    /// One `[x, y]` per vocabulary object.
    pub coords: Vec<[f64; 2]>,
    /// Fraction of total variance captured by each axis.
    pub explained_variance: [f64; 2],
    /// Unit direction per axis, `dim` components each.
    pub loadings: [Vec<f64>; 2],
}

/// A dimensionality reduction from a model to plane coordinates.
pub trait Projector {
    fn name(&self) -> &str;
    fn project(&self, model: &AlignedModel) -> Result<Projection2D>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Pca;

impl Projector for Pca {
    fn name(&self) -> &str {
        "pca"
    }

    fn project(&self, model: &AlignedModel) -> Result<Projection2D> {
        pca_project(model)
    }
}

/// Projects centered rows onto the top two eigenvectors of the covariance
/// matrix.
///
/// Each axis is oriented so its largest-magnitude loading is positive (the
/// first such entry on ties). Equal eigenvalues keep the decomposition's
/// order, which leaves the basis arbitrary but deterministic. One-dimensional
/// models get a zero second axis.
pub fn pca_project(model: &AlignedModel) -> Result<Projection2D> {
    let n = model.len();
    let d = model.dim;
    if n < 3 {
        return Err(Error::Degenerate(format!("PCA needs at least 3 objects, got {n}")));
    }

    let mut mean = vec![0.0f64; d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(model.row(i)) {
            *m += x as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    // upper triangle accumulated in a fixed order
    let mut cov = vec![0.0f64; d * d];
    let mut centered = vec![0.0f64; d];
    for i in 0..n {
        for ((c, &x), m) in centered.iter_mut().zip(model.row(i)).zip(&mean) {
            *c = x as f64 - m;
        }
        for a in 0..d {
            let ca = centered[a];
            let row = &mut cov[a * d..(a + 1) * d];
            for b in a..d {
                row[b] += ca * centered[b];
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] * scale;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    let total: f64 = (0..d).map(|a| cov[a * d + a]).sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all rows are identical".into()));
    }

    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &cov));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut loadings: [Vec<f64>; 2] = [vec![0.0; d], vec![0.0; d]];
    let mut explained = [0.0f64; 2];
    for (axis, &col) in order.iter().take(2).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        explained[axis] = (eig.eigenvalues[col] / total).clamp(0.0, 1.0);
        loadings[axis] = v;
    }

    let coords = (0..n)
        .map(|i| {
            let mut xy = [0.0f64; 2];
            for (axis, l) in loadings.iter().enumerate() {
                let mut acc = 0.0;
                for ((&x, m), w) in model.row(i).iter().zip(&mean).zip(l) {
                    acc += (x as f64 - m) * w;
                }
                xy[axis] = acc;
            }
            xy
        })
        .collect();

    Ok(Projection2D {
        model: model.name.clone(),
        method: "pca".into(),
        coords,
        explained_variance: explained,
        loadings,
    })
}

/// Gathers the stored coordinates of `indices`; never re-fits.
pub fn project_subset(projection: &Projection2D, indices: &[usize]) -> Result<Vec<[f64; 2]>> {
    indices
        .iter()
        .map(|&i| {
            projection
                .coords
                .get(i)
                .copied()
                .ok_or(Error::IndexOutOfRange { index: i, len: projection.coords.len() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(dim: usize, data: Vec<f32>) -> AlignedModel {
        AlignedModel::new("d", "m", dim, data).unwrap()
    }

    #[test]
    fn variance_on_one_axis() {
        let p = pca_project(&model(2, vec![-1.0, 0.0, 1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(p.loadings[0], vec![1.0, 0.0]);
        let xs: Vec<f64> = p.coords.iter().map(|c| c[0]).collect();
        assert_eq!(xs, [-1.0, 1.0, 0.0]);
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
        assert_eq!(p.explained_variance, [1.0, 0.0]);
    }

    #[test]
    fn identical_rows_are_rejected() {
        assert!(matches!(pca_project(&model(2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0])), Err(Error::Degenerate(_))));
        assert!(pca_project(&model(2, vec![1.0, 2.0, 3.0, 4.0])).is_err());
    }

    #[test]
    fn sign_rule_and_centering() {
        let data: Vec<f32> = (0..25 * 4).map(|i| ((i * 31 % 17) as f32 - 8.0) * if i % 4 == 1 { 3.0 } else { 1.0 }).collect();
        let p = pca_project(&model(4, data)).unwrap();
        for l in &p.loadings {
            let max = l.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(max > 0.0);
        }
        for axis in 0..2 {
            let mean = p.coords.iter().map(|c| c[axis]).sum::<f64>() / p.coords.len() as f64;
            assert!(mean.abs() < 1e-6);
        }
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
    }

    #[test]
    fn one_dimensional_model() {
        let p = pca_project(&model(1, vec![0.0, 1.0, 2.0, 10.0])).unwrap();
        assert_eq!(p.explained_variance, [1.0, 0.0]);
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
    }

    #[test]
    fn subset_gathers_rows() {
        let p = pca_project(&model(2, vec![0.0, 0.0, 1.0, 2.0, 3.0, 1.0, 5.0, 5.0])).unwrap();
        assert_eq!(project_subset(&p, &[0, 1, 2, 3]).unwrap(), p.coords);
        assert!(project_subset(&p, &[]).unwrap().is_empty());
        assert_eq!(project_subset(&p, &[3, 1]).unwrap(), vec![p.coords[3], p.coords[1]]);
        assert!(matches!(project_subset(&p, &[4]), Err(Error::IndexOutOfRange { index: 4, len: 4 })));
    }
}
