//! Correlation distances and average-linkage (UPGMA) clustering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_constant, pearson, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Columns,
    Rows,
}

/// Condensed pairwise distances: pair `(i, j)` with `i < j` sits at
/// [`condensed_index`]`(n, i, j)`, i.e. row-major over the upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceVector {
    pub axis: Axis,
    pub labels: Vec<String>,
    pub distances: Vec<f64>,
    /// Pairs where a constant item made the correlation undefined.
    pub degenerate_pairs: Vec<(usize, usize)>,
}

pub fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    n * i - i * (i + 1) / 2 + (j - i - 1)
}

impl DistanceVector {
    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.distances[condensed_index(self.n_items(), i, j)],
            std::cmp::Ordering::Greater => self.distances[condensed_index(self.n_items(), j, i)],
        }
    }
}

/// `1 - rho` between two items. A constant item has `rho = 0`, except that two
/// equal constant items are at distance 0. The flag marks either case.
pub fn pair_distance(a: &[f64], b: &[f64]) -> (f64, bool) {
    match pearson(a, b) {
        Some(r) => ((1.0 - r).clamp(0.0, 2.0), false),
        None => {
            let equal = is_constant(a) && is_constant(b) && a.first() == b.first();
            (if equal { 0.0 } else { 1.0 }, true)
        }
    }
}

/// Pairwise distances between the columns or the rows of `m`.
pub fn correlation_distance(m: &Matrix, labels: &[String], axis: Axis) -> Result<DistanceVector> {
    let items: Vec<Vec<f64>> = match axis {
        Axis::Columns => (0..m.cols()).map(|j| m.column(j)).collect(),
        Axis::Rows => m.to_rows(),
    };
    if items.len() < 2 {
        return Err(Error::Cluster(format!("need at least 2 items, got {}", items.len())));
    }
    if items[0].len() < 2 {
        return Err(Error::Cluster("items need at least 2 entries".into()));
    }
    if labels.len() != items.len() {
        return Err(Error::LengthMismatch(labels.len(), items.len()));
    }
    let n = items.len();
    let mut distances = Vec::with_capacity(n * (n - 1) / 2);
    let mut degenerate_pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (d, flag) = pair_distance(&items[i], &items[j]);
            distances.push(d);
            if flag {
                degenerate_pairs.push((i, j));
            }
        }
    }
    Ok(DistanceVector {
        axis,
        labels: labels.to_vec(),
        distances,
        degenerate_pairs,
    })
}

/// One agglomeration step. Leaves are nodes `0..n`; the node created by step
/// `s` has id `n + s`. `left < right` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    pub n_leaves: usize,
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

/// Average-linkage agglomeration.
///
/// The closest pair of active clusters merges first; among equal distances
/// the pair with the smallest `(lower id, higher id)` wins. Distances to the
/// new cluster follow the size-weighted Lance-Williams update.
pub fn upgma(d: &DistanceVector) -> Result<Linkage> {
    let n = d.n_items();
    if n < 2 {
        return Err(Error::Cluster("need at least 2 items".into()));
    }
    if d.distances.len() != n * (n - 1) / 2 {
        return Err(Error::Cluster("condensed vector has the wrong length".into()));
    }
    if d.distances.iter().any(|v| !v.is_finite()) {
        return Err(Error::Cluster("non-finite distance".into()));
    }
    // slot i holds an active cluster; dist is a full symmetric matrix over slots
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = d.get(i, j);
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let v = dist[a * n + b];
                let key = (id[a].min(id[b]), id[a].max(id[b]));
                let better = match best {
                    None => true,
                    Some((bv, _, _, lo, hi)) => v < bv || (v == bv && key < (lo, hi)),
                };
                if better {
                    best = Some((v, a, b, key.0, key.1));
                }
            }
        }
        let (height, a, b, lo, hi) = best.expect("at least two active clusters");
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let (x, y) = (dist[a * n + k], dist[b * n + k]);
            let v = if x == y {
                x
            } else {
                ((sa * x + sb * y) / (sa + sb)).clamp(x.min(y), x.max(y))
            };
            dist[a * n + k] = v;
            dist[k * n + a] = v;
        }
        size[a] += size[b];
        id[a] = n + step;
        active.retain(|&s| s != b);
        merges.push(Merge {
            left: lo,
            right: hi,
            height,
            size: size[a],
        });
    }
    Ok(Linkage {
        n_leaves: n,
        labels: d.labels.clone(),
        merges,
    })
}

impl Linkage {
    fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.n_leaves)
            .map(|s| (self.merges[s].left, self.merges[s].right))
    }

    pub fn node_size(&self, node: usize) -> usize {
        match node.checked_sub(self.n_leaves) {
            None => 1,
            Some(s) => self.merges[s].size,
        }
    }

    pub fn root(&self) -> usize {
        self.n_leaves + self.merges.len() - 1
    }

    /// Display order of the leaves: depth-first, smaller subtree first
    /// (lower node id on equal sizes).
    pub fn leaf_order(&self) -> Vec<usize> {
        self.leaves_under(self.root())
    }

    /// Leaves under `node`, in display order.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(node) = stack.pop() {
            match self.children(node) {
                None => out.push(node),
                Some((l, r)) => {
                    let (first, second) = if self.node_size(r) < self.node_size(l) { (r, l) } else { (l, r) };
                    stack.push(second);
                    stack.push(first);
                }
            }
        }
        out
    }
}

/// Flat clusters from applying the first `n - k` merges. Cluster ids are
/// numbered by the first leaf (in index order) that belongs to them.
pub fn cut_clusters(linkage: &Linkage, k: usize) -> Result<Vec<usize>> {
    let n = linkage.n_leaves;
    if k == 0 || k > n {
        return Err(Error::Cluster(format!("cannot cut {n} leaves into {k} clusters")));
    }
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (s, m) in linkage.merges.iter().take(n - k).enumerate() {
        let node = n + s;
        let (a, b) = (find(&mut parent, m.left), find(&mut parent, m.right));
        parent[a] = node;
        parent[b] = node;
    }
    let mut ids = std::collections::HashMap::new();
    Ok((0..n)
        .map(|leaf| {
            let root = find(&mut parent, leaf);
            let next = ids.len();
            *ids.entry(root).or_insert(next)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    use super::*;
    use crate::rng::rng;

    fn from_square(labels: &[&str], full: &[&[f64]]) -> DistanceVector {
        let n = labels.len();
        let mut distances = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                distances.push(full[i][j]);
            }
        }
        DistanceVector {
            axis: Axis::Columns,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            distances,
            degenerate_pairs: Vec::new(),
        }
    }

    fn condensed(n: usize, values: Vec<f64>) -> DistanceVector {
        DistanceVector {
            axis: Axis::Rows,
            labels: (0..n).map(|i| i.to_string()).collect(),
            distances: values,
            degenerate_pairs: Vec::new(),
        }
    }

    /// Agglomerate by recomputing every cluster-pair average from leaf distances.
    fn naive_upgma(d: &DistanceVector) -> Vec<(usize, usize, f64, usize)> {
        let n = d.n_items();
        let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
        let mut out = Vec::new();
        for step in 0..n - 1 {
            let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let (ia, la) = &clusters[a];
                    let (ib, lb) = &clusters[b];
                    let mut s = 0.0;
                    for &x in la {
                        for &y in lb {
                            s += d.get(x, y);
                        }
                    }
                    let v = s / (la.len() * lb.len()) as f64;
                    let key = ((*ia).min(*ib), (*ia).max(*ib));
                    if best.map_or(true, |(bv, bk, _, _)| v < bv || (v == bv && key < bk)) {
                        best = Some((v, key, a, b));
                    }
                }
            }
            let (v, key, a, b) = best.unwrap();
            let mut leaves = clusters[a].1.clone();
            leaves.extend(clusters[b].1.iter());
            let size = leaves.len();
            clusters.remove(b);
            clusters[a] = (n + step, leaves);
            out.push((key.0, key.1, v, size));
        }
        out
    }

    #[test]
    fn complements_are_two_apart() {
        let m = Matrix::from_rows(&[vec![0.2, 0.8, 1.0], vec![0.5, 0.5, 2.0], vec![0.8, 0.2, 3.0]]).unwrap();
        let labels = vec!["TPR".to_string(), "FNR".to_string(), "x".to_string()];
        let d = correlation_distance(&m, &labels, Axis::Columns).unwrap();
        assert!((d.get(0, 1) - 2.0).abs() < 1e-12);
        assert!(d.get(0, 2).abs() < 1e-12);
        assert_eq!(d.get(1, 1), 0.0);
        let (lin, _) = pair_distance(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        assert!(lin.abs() < 1e-12);
    }

    #[test]
    fn constant_items() {
        assert_eq!(pair_distance(&[1.0, 1.0], &[1.0, 2.0]), (1.0, true));
        assert_eq!(pair_distance(&[0.5, 0.5], &[0.5, 0.5]), (0.0, true));
        assert_eq!(pair_distance(&[0.5, 0.5], &[0.7, 0.7]), (1.0, true));
    }

    #[test]
    fn too_few_items_rejected() {
        let m = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(correlation_distance(&m, &["a".into()], Axis::Columns).is_err());
    }

    #[test]
    fn three_point_example() {
        let d = from_square(&["A", "B", "C"], &[&[0.0, 1.0, 4.0], &[1.0, 0.0, 5.0], &[4.0, 5.0, 0.0]]);
        let l = upgma(&d).unwrap();
        assert_eq!(l.merges[0], Merge { left: 0, right: 1, height: 1.0, size: 2 });
        assert_eq!(l.merges[1], Merge { left: 2, right: 3, height: 4.5, size: 3 });
    }

    #[test]
    fn two_items_and_equal_distances() {
        let l = upgma(&condensed(2, vec![0.3])).unwrap();
        assert_eq!(l.merges, vec![Merge { left: 0, right: 1, height: 0.3, size: 2 }]);
        let l = upgma(&condensed(4, vec![1.0; 6])).unwrap();
        assert_eq!((l.merges[0].left, l.merges[0].right), (0, 1));
        assert_eq!((l.merges[1].left, l.merges[1].right), (2, 3));
        assert_eq!((l.merges[2].left, l.merges[2].right), (4, 5));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(upgma(&condensed(2, vec![f64::NAN])).is_err());
    }

    #[test]
    fn cuts() {
        let d = from_square(
            &["a", "b", "c", "d"],
            &[&[0.0, 0.1, 0.9, 1.0], &[0.1, 0.0, 0.8, 0.9], &[0.9, 0.8, 0.0, 0.2], &[1.0, 0.9, 0.2, 0.0]],
        );
        let l = upgma(&d).unwrap();
        assert_eq!(cut_clusters(&l, 2).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!(cut_clusters(&l, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(cut_clusters(&l, 1).unwrap(), vec![0, 0, 0, 0]);
        assert!(cut_clusters(&l, 0).is_err());
        assert!(cut_clusters(&l, 5).is_err());
    }

    #[test]
    fn leaf_order_puts_smaller_subtree_first() {
        let d = from_square(&["a", "b", "c"], &[&[0.0, 3.0, 4.0], &[3.0, 0.0, 1.0], &[4.0, 1.0, 0.0]]);
        let l = upgma(&d).unwrap();
        assert_eq!(l.leaf_order(), vec![0, 1, 2]);
        let mut o = l.leaf_order();
        o.sort();
        assert_eq!(o, vec![0, 1, 2]);
    }

    #[test]
    fn matches_naive_agglomeration() {
        let mut r = rng(13);
        for trial in 0..200 {
            let n = 2 + trial % 11;
            let v: Vec<f64> = (0..n * (n - 1) / 2).map(|_| r.gen_range(0.0..2.0)).collect();
            let d = condensed(n, v);
            let fast = upgma(&d).unwrap();
            let slow = naive_upgma(&d);
            for (m, s) in fast.merges.iter().zip(&slow) {
                assert_eq!((m.left, m.right, m.size), (s.0, s.1, s.3));
                assert!((m.height - s.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permutation_preserves_heights() {
        let mut r = rng(4);
        let n = 9;
        let d = condensed(n, (0..36).map(|_| r.gen_range(0.0..2.0)).collect());
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let mut pv = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pv.push(d.get(perm[i], perm[j]));
            }
        }
        let mut a: Vec<f64> = upgma(&d).unwrap().merges.iter().map(|m| m.height).collect();
        let mut b: Vec<f64> = upgma(&condensed(n, pv)).unwrap().merges.iter().map(|m| m.height).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn heights_never_decrease(v in prop::collection::vec(0.0f64..2.0, 1..67)) {
            // truncate to a triangular length
            let mut n = 2;
            while (n + 1) * n / 2 <= v.len() { n += 1; }
            let d = condensed(n, v[..n * (n - 1) / 2].to_vec());
            let l = upgma(&d).unwrap();
            prop_assert_eq!(l.merges.len(), n - 1);
            prop_assert_eq!(l.merges.last().unwrap().size, n);
            for w in l.merges.windows(2) {
                prop_assert!(w[1].height >= w[0].height);
            }
        }

        #[test]
        fn affine_maps_preserve_or_reflect_distances(
            a in prop::collection::vec(-5.0f64..5.0, 4),
            b in prop::collection::vec(-5.0f64..5.0, 4),
            scale in 0.1f64..10.0,
            shift in -3.0f64..3.0,
        ) {
            let (d, flag) = pair_distance(&a, &b);
            prop_assume!(!flag);
            let pos: Vec<f64> = a.iter().map(|x| scale * x + shift).collect();
            let neg: Vec<f64> = a.iter().map(|x| -scale * x + shift).collect();
            prop_assert!((pair_distance(&pos, &b).0 - d).abs() < 1e-9);
            prop_assert!((pair_distance(&neg, &b).0 - (2.0 - d)).abs() < 1e-9);
        }
    }
}
