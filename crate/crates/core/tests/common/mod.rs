//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

pub mod checks;

use rand::Rng;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn random_cloud(rng: &mut impl Rng, max_points: usize, dim: usize) -> Vec<Vec<f64>> {
    let n = rng.random_range(1..=max_points);
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Persistence pairs `(dim, birth, death)` of the full Rips 2-skeleton by
/// dense boundary-matrix column reduction over Z/2. Zero-length pairs are
/// dropped; essential classes carry `f64::INFINITY`.
pub fn boundary_reduction_pairs(points: &[Vec<f64>]) -> Vec<(usize, f64, f64)> {
    let n = points.len();
    let d = |i: usize, j: usize| dist(&points[i], &points[j]);
    let mut simplices: Vec<(f64, Vec<usize>)> = (0..n).map(|i| (0.0, vec![i])).collect();
    for i in 0..n {
        for j in i + 1..n {
            simplices.push((d(i, j), vec![i, j]));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                simplices.push((d(i, j).max(d(i, k)).max(d(j, k)), vec![i, j, k]));
            }
        }
    }
    // Faces before cofaces: by value, then dimension.
    simplices.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.len().cmp(&b.1.len())).then(a.1.cmp(&b.1)));
    let m = simplices.len();
    let index_of = |v: &[usize]| simplices.iter().position(|s| s.1 == v).unwrap();
    let mut cols: Vec<Vec<bool>> = vec![vec![false; m]; m];
    for (c, (_, v)) in simplices.iter().enumerate() {
        if v.len() > 1 {
            for skip in 0..v.len() {
                let face: Vec<usize> = v.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &x)| x).collect();
                cols[c][index_of(&face)] = true;
            }
        }
    }
    let low = |col: &Vec<bool>| col.iter().rposition(|&b| b);
    let mut low_owner: Vec<Option<usize>> = vec![None; m];
    for c in 0..m {
        while let Some(l) = low(&cols[c]) {
            match low_owner[l] {
                Some(o) => {
                    let other = cols[o].clone();
                    for (x, y) in cols[c].iter_mut().zip(other) {
                        *x ^= y;
                    }
                }
                None => {
                    low_owner[l] = Some(c);
                    break;
                }
            }
        }
    }
    let mut pairs = Vec::new();
    let mut killed = vec![false; m];
    for c in 0..m {
        if let Some(l) = low(&cols[c]) {
            killed[l] = true;
            let dim = simplices[l].1.len() - 1;
            if simplices[c].0 > simplices[l].0 && dim <= 1 {
                pairs.push((dim, simplices[l].0, simplices[c].0));
            }
        }
    }
    for c in 0..m {
        let dim = simplices[c].1.len() - 1;
        if low(&cols[c]).is_none() && !killed[c] && dim <= 1 {
            pairs.push((dim, simplices[c].0, f64::INFINITY));
        }
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    pairs
}

/// Euclidean minimum spanning tree edge lengths by Prim's algorithm, sorted.
pub fn mst_lengths(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut out = Vec::new();
    for step in 0..n {
        let u = (0..n).filter(|&i| !in_tree[i]).min_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        in_tree[u] = true;
        if step > 0 {
            out.push(best[u]);
        }
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(dist(&points[u], &points[v]));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    fn rec(k: usize, perm: &mut Vec<usize>, used: &mut Vec<bool>, f: &mut dyn FnMut(&[usize])) {
        if k == perm.capacity() {
            f(perm);
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                perm.push(i);
                rec(k + 1, perm, used, f);
                perm.pop();
                used[i] = false;
            }
        }
    }
    let mut perm = Vec::with_capacity(n);
    let mut used = vec![false; n];
    rec(0, &mut perm, &mut used, &mut f);
}

/// 1-Wasserstein distance under L∞ between finite diagrams by enumerating
/// every partial matching, unmatched points paying their diagonal distance.
pub fn wasserstein_brute(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let diag = |p: &(f64, f64)| (p.1 - p.0) / 2.0;
    let between = |p: &(f64, f64), q: &(f64, f64)| (p.0 - q.0).abs().max((p.1 - q.1).abs());
    // Pad both sides with diagonal slots so every partial matching appears
    // as a permutation.
    let size = a.len() + b.len();
    let mut best = f64::INFINITY;
    for_each_permutation(size, |perm| {
        let mut cost = 0.0;
        for (i, &j) in perm.iter().enumerate() {
            cost += match (i < a.len(), j < b.len()) {
                (true, true) => between(&a[i], &b[j]),
                (true, false) => diag(&a[i]),
                (false, true) => diag(&b[j]),
                (false, false) => 0.0,
            };
        }
        best = best.min(cost);
    });
    if size == 0 {
        0.0
    } else {
        best
    }
}

/// Maximum total weight over matchings of present pairs, by enumerating
/// every injection of the smaller side.
pub fn matching_brute(w: &[Vec<Option<f64>>]) -> f64 {
    let rows = w.len();
    let cols = w.first().map_or(0, Vec::len);
    let size = rows.max(cols);
    let mut best = 0.0f64;
    for_each_permutation(size, |perm| {
        let mut total = 0.0;
        for (r, &c) in perm.iter().enumerate() {
            if r < rows && c < cols {
                total += w[r][c].unwrap_or(0.0);
            }
        }
        best = best.max(total);
    });
    best
}
