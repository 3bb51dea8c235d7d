//! Topological-descriptor affinity between task neighborhoods.
//!
//! Each node's k-hop neighborhood (1-hop relation: feature distance below a
//! threshold) is turned into a Rips persistence diagram; the affinity between
//! nodes `i` and `j` is `1 / (1 + W_p(PD_i, PD_j))`.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::persistence::{rips_persistence, PersistenceDiagram};
use super::wasserstein::{wasserstein_distance, GroundMetric};
use super::TopologyError;
use crate::taskgraph::{euclidean, graph_laplacian, GraphError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdConfig {
    pub hops: usize,
    /// Neighbor threshold on normalized feature distance.
    pub neighbor_threshold: f64,
    pub max_dim: usize,
    pub order: f64,
    pub metric: GroundMetric,
}

impl Default for TdConfig {
    fn default() -> Self {
        TdConfig { hops: 1, neighbor_threshold: 0.3, max_dim: 1, order: 1.0, metric: GroundMetric::LInf }
    }
}

impl TdConfig {
    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.hops < 1 || !(self.neighbor_threshold > 0.0) || !(self.order >= 1.0) || self.max_dim > 1 {
            return Err(TopologyError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Indices of all nodes within `cfg.hops` hops of `node`, including `node`,
/// in ascending order.
pub fn khop_neighbors(features: ArrayView2<f64>, node: usize, cfg: &TdConfig) -> Vec<usize> {
    let n = features.nrows();
    let mut depth = vec![usize::MAX; n];
    depth[node] = 0;
    let mut queue = VecDeque::from([node]);
    while let Some(u) = queue.pop_front() {
        if depth[u] == cfg.hops {
            continue;
        }
        for v in 0..n {
            if depth[v] == usize::MAX && euclidean(features.row(u), features.row(v)) < cfg.neighbor_threshold {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (0..n).filter(|&v| depth[v] != usize::MAX).collect()
}

/// Feature vectors of the k-hop neighborhood of `node`.
pub fn khop_subgraph(features: ArrayView2<f64>, node: usize, cfg: &TdConfig) -> Vec<Vec<f64>> {
    khop_neighbors(features, node, cfg).into_iter().map(|j| features.row(j).to_vec()).collect()
}

fn neighborhood_key(points: &[Vec<f64>]) -> u64 {
    let mut rows: Vec<Vec<u64>> = points.iter().map(|p| p.iter().map(|v| v.to_bits()).collect()).collect();
    rows.sort_unstable();
    let mut h = DefaultHasher::new();
    rows.hash(&mut h);
    h.finish()
}

/// Recomputes every diagram and every distance with no caching.
pub fn td_affinity_naive(features: ArrayView2<f64>, cfg: &TdConfig) -> Result<Array2<f64>, TopologyError> {
    let n = features.nrows();
    let diagrams: Vec<PersistenceDiagram> = (0..n)
        .map(|i| rips_persistence(&khop_subgraph(features, i, cfg), cfg.max_dim))
        .collect::<Result<_, _>>()?;
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        out[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let w = wasserstein_distance(&diagrams[i], &diagrams[j], cfg.order, cfg.metric);
            let v = 1.0 / (1.0 + w);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(out)
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CacheStats {
    pub diagrams_computed: usize,
    pub distances_computed: usize,
}

/// Content-addressed cache of neighborhood diagrams and their pairwise
/// distances. Only neighborhoods whose feature vectors changed since a
/// previous call trigger new persistence or matching work.
#[derive(Debug, Default)]
pub struct TdCache {
    diagrams: HashMap<u64, Arc<PersistenceDiagram>>,
    distances: HashMap<(u64, u64), f64>,
    stats: CacheStats,
}

impl TdCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn clear(&mut self) {
        self.diagrams.clear();
        self.distances.clear();
    }

    /// Per-node diagrams for the current features.
    pub fn diagrams(&mut self, features: ArrayView2<f64>, cfg: &TdConfig) -> Result<Vec<(u64, Arc<PersistenceDiagram>)>, TopologyError> {
        let n = features.nrows();
        let hoods: Vec<Vec<Vec<f64>>> = (0..n).map(|i| khop_subgraph(features, i, cfg)).collect();
        let keys: Vec<u64> = hoods.iter().map(|h| neighborhood_key(h)).collect();

        let mut missing: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, k) in keys.iter().enumerate() {
            if !self.diagrams.contains_key(k) && seen.insert(*k) {
                missing.push(i);
            }
        }
        let computed: Vec<(u64, PersistenceDiagram)> = missing
            .par_iter()
            .map(|&i| rips_persistence(&hoods[i], cfg.max_dim).map(|d| (keys[i], d)))
            .collect::<Result<_, _>>()?;
        self.stats.diagrams_computed += computed.len();
        for (k, d) in computed {
            self.diagrams.insert(k, Arc::new(d));
        }
        Ok(keys.into_iter().map(|k| (k, Arc::clone(&self.diagrams[&k]))).collect())
    }

    pub fn affinity(&mut self, features: ArrayView2<f64>, cfg: &TdConfig) -> Result<Array2<f64>, TopologyError> {
        let diagrams = self.diagrams(features, cfg)?;
        let n = diagrams.len();
        let mut out = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            out[[i, i]] = 1.0;
            for j in (i + 1)..n {
                let (ki, kj) = (diagrams[i].0, diagrams[j].0);
                let w = if ki == kj {
                    0.0
                } else {
                    let key = (ki.min(kj), ki.max(kj));
                    match self.distances.get(&key) {
                        Some(&w) => w,
                        None => {
                            let (a, b) = if ki < kj { (&diagrams[i].1, &diagrams[j].1) } else { (&diagrams[j].1, &diagrams[i].1) };
                            let w = wasserstein_distance(a, b, cfg.order, cfg.metric);
                            self.stats.distances_computed += 1;
                            self.distances.insert(key, w);
                            w
                        }
                    }
                };
                let v = 1.0 / (1.0 + w);
                out[[i, j]] = v;
                out[[j, i]] = v;
            }
        }
        Ok(out)
    }
}

/// TD affinity with a throwaway cache.
pub fn td_affinity(features: ArrayView2<f64>, cfg: &TdConfig) -> Result<Array2<f64>, TopologyError> {
    TdCache::new().affinity(features, cfg)
}

/// Normalized Laplacian of the TD affinity, the encoder's drop-in
/// replacement for the plain graph Laplacian.
pub fn td_laplacian(features: ArrayView2<f64>, cfg: &TdConfig, cache: &mut TdCache) -> Result<Array2<f64>, TopologyError> {
    let affinity = cache.affinity(features, cfg)?;
    graph_laplacian(affinity.view()).map_err(|e: GraphError| TopologyError::Graph(e.to_string()))
}

/// Text dump of `(node, dim, birth, death)` rows for cross-checking against
/// external TDA tools.
pub fn dump_diagrams(diagrams: &[PersistenceDiagram]) -> String {
    let mut out = String::from("# node dim birth death\n");
    for (node, d) in diagrams.iter().enumerate() {
        for (dim, pairs) in d.pairs.iter().enumerate() {
            for p in pairs {
                let _ = writeln!(out, "{} {} {:e} {}", node + 1, dim, p.birth, if p.is_essential() { "inf".to_string() } else { format!("{:e}", p.death) });
            }
        }
    }
    out
}
