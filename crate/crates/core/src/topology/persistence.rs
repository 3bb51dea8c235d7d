//! Vietoris–Rips filtrations and persistence pairs in dimensions 0 and 1.
//!
//! H0 comes from a union-find sweep over the edges in filtration order
//! (Kruskal). H1 comes from reducing the triangle boundary columns over Z/2;
//! each pivot edge is a cycle born at the edge value and killed at the
//! triangle value. The 2-skeleton of a full simplex has trivial H1, so every
//! cycle eventually dies.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TopologyError;

/// A (birth, death) pair; `death` is `f64::INFINITY` for essential classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub birth: f64,
    pub death: f64,
}

impl PersistencePair {
    pub fn new(birth: f64, death: f64) -> Self {
        PersistencePair { birth, death }
    }

    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Persistence pairs per homology dimension; `pairs[p]` holds H_p.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub pairs: Vec<Vec<PersistencePair>>,
}

impl PersistenceDiagram {
    pub fn empty(max_dim: usize) -> Self {
        PersistenceDiagram { pairs: vec![Vec::new(); max_dim + 1] }
    }

    pub fn dim(&self, p: usize) -> &[PersistencePair] {
        self.pairs.get(p).map_or(&[], |v| v.as_slice())
    }

    pub fn max_dim(&self) -> usize {
        self.pairs.len().saturating_sub(1)
    }

    /// Pairs of each dimension sorted by (birth, death); makes diagrams
    /// comparable as multisets.
    pub fn sorted(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.pairs {
            v.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
        }
        out
    }
}

/// A simplex of the Rips complex with its filtration value.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub vertices: Vec<usize>,
    pub value: f64,
}

impl Simplex {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// Filtration order: value, then dimension, then vertex lexicographic order.
/// Faces never come after their cofaces because a face has value no larger
/// and strictly smaller dimension.
pub fn filtration_order(a: &Simplex, b: &Simplex) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.vertices.len().cmp(&b.vertices.len()))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

pub fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// All simplices up to `max_simplex_dim`, sorted in filtration order.
pub fn rips_filtration(dist: &[Vec<f64>], max_simplex_dim: usize) -> Vec<Simplex> {
    let n = dist.len();
    let mut out: Vec<Simplex> = (0..n).map(|i| Simplex { vertices: vec![i], value: 0.0 }).collect();
    if max_simplex_dim >= 1 {
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(Simplex { vertices: vec![i, j], value: dist[i][j] });
            }
        }
    }
    if max_simplex_dim >= 2 {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let v = dist[i][j].max(dist[i][k]).max(dist[j][k]);
                    out.push(Simplex { vertices: vec![i, j, k], value: v });
                }
            }
        }
    }
    out.sort_by(filtration_order);
    out
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // All vertices are born at 0, so the elder rule never matters here.
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

fn push_pair(out: &mut Vec<PersistencePair>, birth: f64, death: f64) {
    if death > birth {
        out.push(PersistencePair::new(birth, death));
    }
}

/// Persistence diagram of the Rips filtration on `points` (Euclidean
/// distances). `max_dim` must be 0 or 1. Zero-length pairs are dropped.
pub fn rips_persistence(points: &[Vec<f64>], max_dim: usize) -> Result<PersistenceDiagram, TopologyError> {
    if points.is_empty() {
        return Err(TopologyError::EmptyPointSet);
    }
    if max_dim > 1 {
        return Err(TopologyError::UnsupportedDimension(max_dim));
    }
    let dist = distance_matrix(points);
    Ok(rips_persistence_from_distances(&dist, max_dim))
}

pub fn rips_persistence_from_distances(dist: &[Vec<f64>], max_dim: usize) -> PersistenceDiagram {
    let n = dist.len();
    let mut diagram = PersistenceDiagram::empty(max_dim);

    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((dist[i][j], i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut uf = UnionFind::new(n);
    let mut positive_edge = vec![false; edges.len()];
    for (idx, &(v, i, j)) in edges.iter().enumerate() {
        if uf.union(i, j) {
            push_pair(&mut diagram.pairs[0], 0.0, v);
        } else {
            positive_edge[idx] = true;
        }
    }
    diagram.pairs[0].push(PersistencePair::new(0.0, f64::INFINITY));

    if max_dim >= 1 && n >= 3 {
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (idx, &(_, i, j)) in edges.iter().enumerate() {
            edge_index.insert((i, j), idx);
        }
        let mut triangles: Vec<(f64, [usize; 3])> = Vec::with_capacity(n * (n - 1) * (n - 2) / 6);
        let mut remaining_cycles = positive_edge.iter().filter(|&&p| p).count();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let v = dist[i][j].max(dist[i][k]).max(dist[j][k]);
                    triangles.push((v, [i, j, k]));
                }
            }
        }
        triangles.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        // pivot_owner[e] = reduced column whose lowest entry is edge e.
        let mut pivot_owner: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(value, [i, j, k]) in &triangles {
            if remaining_cycles == 0 {
                break;
            }
            let mut col = vec![edge_index[&(i, j)], edge_index[&(i, k)], edge_index[&(j, k)]];
            col.sort_unstable();
            while let Some(&low) = col.last() {
                match pivot_owner.get(&low) {
                    Some(other) => col = symmetric_difference(&col, other),
                    None => break,
                }
            }
            if let Some(&low) = col.last() {
                debug_assert!(positive_edge[low]);
                push_pair(&mut diagram.pairs[1], edges[low].0, value);
                pivot_owner.insert(low, col);
                remaining_cycles -= 1;
            }
        }
    }
    diagram
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
