//! Persistent homology of task neighborhoods and the TD affinity/Laplacian.

pub mod persistence;
pub mod td;
pub mod wasserstein;

use thiserror::Error;

pub use persistence::{rips_persistence, PersistenceDiagram, PersistencePair};
pub use td::{khop_neighbors, khop_subgraph, td_affinity, td_affinity_naive, td_laplacian, TdCache, TdConfig};
pub use wasserstein::{bottleneck_pairs, wasserstein_distance, wasserstein_pairs, GroundMetric};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("persistence of an empty point set")]
    EmptyPointSet,
    #[error("homology dimension {0} not supported (max 1)")]
    UnsupportedDimension(usize),
    #[error("invalid TD config: {0}")]
    InvalidConfig(String),
    #[error("graph error: {0}")]
    Graph(String),
}
