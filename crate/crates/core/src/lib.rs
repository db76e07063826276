//! Compare embedding spaces by how much each object's local neighborhood
//! changes between them.
//!
//! The pipeline is: parse and align models onto a shared vocabulary
//! ([`ingest`]), compute exact neighbor tables ([`knn`]), score each object
//! by the Jaccard overlap of its two k-NN sets ([`lns`]), project each space
//! to the plane ([`projection`]) and assemble per-object views
//! ([`domino`]).

pub mod cache;
pub mod domino;
pub mod error;
pub mod ingest;
pub mod knn;
pub mod lns;
pub mod metric;
pub mod projection;
pub mod synthetic;

pub use domino::{rank_dominoes, search_objects, ComparisonView, Domino, DominoPage, DominoQuery, RankOrder, Ranking};
pub use error::{Error, Result};
pub use ingest::{filter_top_n, intersect_vocabulary, parse_embedding_file, AlignedModel, Dataset, Format, RawEmbedding};
pub use knn::{knn_all, NeighborTable};
pub use lns::{compute_lns, jaccard, similarity_histogram, ComparisonConfig, ComparisonResult, HistogramBin};
pub use metric::{distance, Distance, Metric, Registry};
pub use projection::{pca_project, project_subset, Pca, Projection2D, Projector};
