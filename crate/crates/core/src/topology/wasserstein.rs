//! Wasserstein and bottleneck distances between persistence diagrams.

use serde::{Deserialize, Serialize};

use super::persistence::{PersistenceDiagram, PersistencePair};
use crate::assignment::min_cost_assignment;

/// Ground metric on the (birth, death) plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GroundMetric {
    #[default]
    LInf,
    L2,
}

impl GroundMetric {
    pub fn between(&self, a: &PersistencePair, b: &PersistencePair) -> f64 {
        let db = (a.birth - b.birth).abs();
        let dd = (a.death - b.death).abs();
        match self {
            GroundMetric::LInf => db.max(dd),
            GroundMetric::L2 => db.hypot(dd),
        }
    }

    /// Distance from a point to its projection onto the diagonal.
    pub fn to_diagonal(&self, a: &PersistencePair) -> f64 {
        let half = (a.death - a.birth) / 2.0;
        match self {
            GroundMetric::LInf => half,
            GroundMetric::L2 => half * std::f64::consts::SQRT_2,
        }
    }
}

fn max_finite(a: &[PersistencePair], b: &[PersistencePair]) -> f64 {
    a.iter()
        .chain(b)
        .flat_map(|p| [p.birth, p.death])
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
}

/// Replaces infinite deaths with the largest finite filtration value seen in
/// either diagram.
pub fn truncate_essential(a: &[PersistencePair], b: &[PersistencePair]) -> (Vec<PersistencePair>, Vec<PersistencePair>) {
    let cap = max_finite(a, b);
    let fix = |v: &[PersistencePair]| {
        v.iter()
            .map(|p| if p.is_essential() { PersistencePair::new(p.birth, cap.max(p.birth)) } else { *p })
            .collect::<Vec<_>>()
    };
    (fix(a), fix(b))
}

/// Cost matrix of the diagonal-augmented matching problem, entries raised to
/// `order`. Rows are A's points followed by B's diagonal slots; columns are
/// B's points followed by A's diagonal slots.
pub fn augmented_costs(a: &[PersistencePair], b: &[PersistencePair], order: f64, metric: GroundMetric) -> Vec<Vec<f64>> {
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    let mut cost = vec![vec![0.0; size]; size];
    for i in 0..n {
        let diag = metric.to_diagonal(&a[i]).powf(order);
        for j in 0..m {
            cost[i][j] = metric.between(&a[i], &b[j]).powf(order);
        }
        for j in m..size {
            cost[i][j] = diag;
        }
    }
    for j in 0..m {
        let diag = metric.to_diagonal(&b[j]).powf(order);
        for row in cost.iter_mut().skip(n) {
            row[j] = diag;
        }
    }
    cost
}

/// p-Wasserstein distance between two single-dimension diagrams. Essential
/// classes are truncated first, so the result is always finite.
pub fn wasserstein_pairs(a: &[PersistencePair], b: &[PersistencePair], order: f64, metric: GroundMetric) -> f64 {
    let (a, b) = truncate_essential(a, b);
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let cost = augmented_costs(&a, &b, order, metric);
    let (total, _) = min_cost_assignment(&cost);
    total.max(0.0).powf(1.0 / order)
}

/// Sum over homology dimensions of the per-dimension Wasserstein distance.
pub fn wasserstein_distance(a: &PersistenceDiagram, b: &PersistenceDiagram, order: f64, metric: GroundMetric) -> f64 {
    let dims = a.pairs.len().max(b.pairs.len());
    (0..dims).map(|p| wasserstein_pairs(a.dim(p), b.dim(p), order, metric)).sum()
}

/// Bottleneck distance for a single dimension, by binary search over the
/// candidate thresholds with a perfect-matching feasibility test.
pub fn bottleneck_pairs(a: &[PersistencePair], b: &[PersistencePair], metric: GroundMetric) -> f64 {
    let (a, b) = truncate_essential(a, b);
    let (n, m) = (a.len(), b.len());
    if n + m == 0 {
        return 0.0;
    }
    let raw = augmented_costs(&a, &b, 1.0, metric);
    let mut candidates: Vec<f64> = raw.iter().flatten().copied().collect();
    candidates.push(0.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let feasible = |t: f64| {
        let c: Vec<Vec<f64>> = raw.iter().map(|r| r.iter().map(|&v| if v <= t { 0.0 } else { 1.0 }).collect()).collect();
        min_cost_assignment(&c).0 == 0.0
    };
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(b: f64, d: f64) -> PersistencePair {
        PersistencePair::new(b, d)
    }

    #[test]
    fn identical_diagrams_are_zero() {
        let a = vec![pp(0.0, 1.0), pp(0.5, 2.0), pp(0.0, f64::INFINITY)];
        assert_eq!(wasserstein_pairs(&a, &a, 1.0, GroundMetric::LInf), 0.0);
    }

    #[test]
    fn single_point_against_empty() {
        let w = wasserstein_pairs(&[pp(1.0, 3.0)], &[], 1.0, GroundMetric::LInf);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn direct_match_beats_diagonal() {
        let w = wasserstein_pairs(&[pp(0.0, 2.0)], &[pp(0.0, 4.0)], 1.0, GroundMetric::LInf);
        assert_eq!(w, 2.0);
    }

    #[test]
    fn bottleneck_simple() {
        let a = [pp(0.0, 2.0), pp(1.0, 1.2)];
        let b = [pp(0.0, 2.5)];
        assert!((bottleneck_pairs(&a, &b, GroundMetric::LInf) - 0.5).abs() < 1e-12);
    }
}
