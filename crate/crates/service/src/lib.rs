//! Precompute, serve and query local neighborhood comparisons between
//! embedding models.

pub mod api;
pub mod precompute;
pub mod state;
pub mod store;

use std::io::Write;

use embdiff_core::rank_dominoes;

pub use state::{PairParams, Service, ServiceError};

/// `/api/compare` body for a pair, as written by the `compare` command.
pub fn compare_json(service: &Service, params: &PairParams) -> Result<Vec<u8>, ServiceError> {
    let body = service.compare(params, embdiff_core::lns::DEFAULT_BINS)?;
    serde_json::to_vec(&body).map_err(|e| ServiceError::Internal(e.to_string()))
}

/// `rank  token  score` rows, least similar first.
pub fn compare_tsv<W: Write>(service: &Service, params: &PairParams, mut out: W) -> anyhow::Result<()> {
    let body = service.compare(params, embdiff_core::lns::DEFAULT_BINS)?;
    let vocabulary = &service.entry(&params.dataset)?.dataset.vocabulary;
    let ranking = rank_dominoes(&body.scores, vocabulary);
    writeln!(out, "rank\ttoken\tscore")?;
    for (rank, &i) in ranking.least.iter().enumerate() {
        writeln!(out, "{}\t{}\t{}", rank + 1, vocabulary[i as usize], body.scores[i as usize])?;
    }
    Ok(())
}
