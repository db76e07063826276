//! Seeded synthetic embedding pairs with a known set of changed objects.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::{AlignedModel, Dataset};

/// Norm multiplier for replacement vectors, relative to the base cloud.
pub const FAR_FIELD_SCALE: f32 = 10.0;

pub fn token_name(i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("w{i:0width$}")
}

/// Standard-normal `n × dim` matrix.
pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f32> {
    (0..n * dim).map(|_| StandardNormal.sample(rng)).collect()
}

#[derive(Debug, Clone)]
pub struct PerturbedPair {
    pub dataset: Dataset,
    /// Vocabulary indices whose vectors differ between the two models.
    pub perturbed: Vec<usize>,
}

/// Model `a` is a standard-normal cloud; model `b` copies it and replaces
/// `perturbed` randomly chosen objects with independent far-field vectors.
/// Tokens are zero-padded so vocabulary order equals generation order.
pub fn perturbed_pair(seed: u64, n: usize, dim: usize, perturbed: usize) -> Result<PerturbedPair> {
    if n < 3 || dim == 0 || perturbed > n {
        return Err(Error::InvalidConfig(format!("cannot perturb {perturbed} of {n} objects in {dim} dims")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = gaussian_matrix(&mut rng, n, dim);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut chosen = order[..perturbed].to_vec();
    chosen.sort_unstable();

    let mut moved = base.clone();
    for &i in &chosen {
        for x in &mut moved[i * dim..(i + 1) * dim] {
            let v: f32 = StandardNormal.sample(&mut rng);
            *x = v * FAR_FIELD_SCALE;
        }
    }
    let id = format!("synthetic-{seed}");
    let vocabulary = (0..n).map(|i| token_name(i, n)).collect();
    let models = vec![
        AlignedModel::new(id.as_str(), "A", dim, base)?,
        AlignedModel::new(id.as_str(), "B", dim, moved)?,
    ];
    Ok(PerturbedPair { dataset: Dataset::from_aligned(id, vocabulary, models)?, perturbed: chosen })
}
