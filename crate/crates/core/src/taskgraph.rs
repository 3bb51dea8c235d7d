//! Complete weighted task graph and its symmetric-normalized Laplacian.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1, ArrayView2};
use thiserror::Error;

/// Node features per task: `[x, y, deadline, remaining demand]`, normalized.
pub const NODE_FEATURES: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("empty graph")]
    Empty,
    #[error("feature matrix must have {NODE_FEATURES} columns, got {0}")]
    FeatureWidth(usize),
    #[error("adjacency must be square and symmetric")]
    NotSymmetric,
    #[error("node {0} has zero degree")]
    ZeroDegree(usize),
}

pub fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `1 / (1 + |a - b|)`.
pub fn edge_weight(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    1.0 / (1.0 + euclidean(a, b))
}

/// Immutable snapshot of the task graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    pub features: Array2<f64>,
    pub adjacency: Array2<f64>,
    pub laplacian: Array2<f64>,
}

impl TaskGraph {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Distinct undirected edges of the complete graph.
    pub fn edge_count(&self) -> usize {
        let n = self.len();
        n * n.saturating_sub(1) / 2
    }

    /// Dense text dump of the adjacency matrix, one row per line.
    pub fn dump_adjacency(&self) -> String {
        let mut out = String::new();
        for row in self.adjacency.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }
}

pub fn pairwise_weights(features: ArrayView2<f64>) -> Array2<f64> {
    let n = features.nrows();
    let mut omega = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        omega[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let w = edge_weight(features.row(i), features.row(j));
            omega[[i, j]] = w;
            omega[[j, i]] = w;
        }
    }
    omega
}

pub fn build_task_graph(features: Array2<f64>) -> Result<TaskGraph, GraphError> {
    if features.nrows() == 0 {
        return Err(GraphError::Empty);
    }
    if features.ncols() != NODE_FEATURES {
        return Err(GraphError::FeatureWidth(features.ncols()));
    }
    let adjacency = pairwise_weights(features.view());
    let laplacian = graph_laplacian(adjacency.view())?;
    Ok(TaskGraph { features, adjacency, laplacian })
}

/// `I - D^{-1/2} A D^{-1/2}` for a symmetric affinity `A` with weighted
/// degree diagonal `D`.
pub fn graph_laplacian(adjacency: ArrayView2<f64>) -> Result<Array2<f64>, GraphError> {
    let n = adjacency.nrows();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    if adjacency.ncols() != n {
        return Err(GraphError::NotSymmetric);
    }
    let mut inv_sqrt = Vec::with_capacity(n);
    for (i, row) in adjacency.rows().into_iter().enumerate() {
        let d: f64 = row.sum();
        if !(d > 0.0) {
            return Err(GraphError::ZeroDegree(i));
        }
        inv_sqrt.push(1.0 / d.sqrt());
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let a = adjacency[[i, j]];
            if a != adjacency[[j, i]] {
                return Err(GraphError::NotSymmetric);
            }
            let v = -a * inv_sqrt[i] * inv_sqrt[j];
            if i == j {
                l[[i, i]] = 1.0 + v;
            } else {
                l[[i, j]] = v;
                l[[j, i]] = v;
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn weight_examples() {
        let a = Array1::from(vec![0.0, 0.0, 0.0, 0.0]);
        let b = Array1::from(vec![0.6, 0.8, 0.0, 0.0]);
        assert_eq!(edge_weight(a.view(), a.view()), 1.0);
        assert!((edge_weight(a.view(), b.view()) - 0.5).abs() < 1e-15);
        assert_eq!(edge_weight(a.view(), b.view()), edge_weight(b.view(), a.view()));
    }

    #[test]
    fn single_node_graph() {
        let g = build_task_graph(array![[0.1, 0.2, 0.3, 0.4]]).unwrap();
        assert_eq!(g.adjacency, array![[1.0]]);
        assert_eq!(g.laplacian, array![[0.0]]);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn empty_graph_rejected() {
        assert_eq!(build_task_graph(Array2::zeros((0, 4))).unwrap_err(), GraphError::Empty);
    }

    #[test]
    fn two_node_laplacian_against_combinatorial() {
        let w = 0.3;
        let omega = array![[1.0, w], [w, 1.0]];
        let l = graph_laplacian(omega.view()).unwrap();
        // Combinatorial L = D - A has zero row sums; normalized L = D^-1/2 (D - A) D^-1/2.
        let d = 1.0 + w;
        let comb = array![[d - 1.0, -w], [-w, d - 1.0]];
        assert!(comb.rows().into_iter().all(|r| r.sum().abs() < 1e-15));
        for i in 0..2 {
            for j in 0..2 {
                assert!((l[[i, j]] - comb[[i, j]] / d).abs() < 1e-15);
            }
        }
        assert_eq!(l[[0, 1]], l[[1, 0]]);
    }

    #[test]
    fn edge_count_matches_complete_graph() {
        for n in 1..8 {
            let g = build_task_graph(Array2::from_shape_fn((n, 4), |(i, j)| (i * 4 + j) as f64 * 0.1)).unwrap();
            assert_eq!(g.edge_count(), n * (n - 1) / 2);
        }
    }
}
