//! BIRCH: single-pass clustering-feature tree plus a global merge step.
//!
//! Points are inserted in table row order. Each leaf entry is a CF triple
//! `(n, linear_sum, squared_sum)`; a point is absorbed into its closest leaf
//! entry when the merged radius stays within `threshold`, otherwise it opens
//! a new entry, splitting nodes that exceed the branching factor. The leaf
//! entries are then merged down to `k` clusters by agglomerative average
//! linkage on their centroids (pairs weighted by entry population). Every
//! tie goes to the lowest index, so the result is a pure function of the
//! table order and parameters.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::numeric::squared_distance;

#[derive(Debug, Clone)]
pub struct BirchParams {
    /// Maximum leaf-entry radius.
    pub threshold: f64,
    /// Maximum entries per node before it splits.
    pub branching: usize,
}

impl Default for BirchParams {
    fn default() -> Self {
        BirchParams {
            threshold: 0.5,
            branching: 50,
        }
    }
}

/// Clustering feature: count, per-dimension linear sum, scalar squared sum.
#[derive(Debug, Clone)]
struct Cf {
    n: usize,
    ls: Vec<f64>,
    ss: f64,
}

impl Cf {
    fn from_point(p: &[f64]) -> Self {
        Cf {
            n: 1,
            ls: p.to_vec(),
            ss: p.iter().map(|v| v * v).sum(),
        }
    }

    fn add(&mut self, other: &Cf) {
        self.n += other.n;
        for (a, b) in self.ls.iter_mut().zip(&other.ls) {
            *a += b;
        }
        self.ss += other.ss;
    }

    fn centroid(&self) -> Vec<f64> {
        self.ls.iter().map(|v| v / self.n as f64).collect()
    }

    /// RMS distance of members to the centroid; the squared form can go
    /// slightly negative from cancellation and is clamped at zero.
    fn radius(&self) -> f64 {
        let n = self.n as f64;
        let centroid_norm2: f64 = self.ls.iter().map(|v| (v / n) * (v / n)).sum();
        (self.ss / n - centroid_norm2).max(0.0).sqrt()
    }

    fn centroid_d2(&self, p: &[f64]) -> f64 {
        let n = self.n as f64;
        p.iter()
            .zip(&self.ls)
            .map(|(x, l)| {
                let d = x - l / n;
                d * d
            })
            .sum()
    }
}

/// Leaf entry: a CF plus the table rows it absorbed.
#[derive(Debug, Clone)]
struct LeafEntry {
    cf: Cf,
    rows: Vec<usize>,
}

enum Node {
    Leaf(Vec<LeafEntry>),
    Internal(Vec<(Cf, Node)>),
}

enum Insert {
    Done,
    Split(Node, Node),
}

fn insert(node: &mut Node, point: &[f64], row: usize, params: &BirchParams) -> Insert {
    match node {
        Node::Leaf(entries) => {
            let mut best: Option<(f64, usize)> = None;
            for (i, e) in entries.iter().enumerate() {
                let d2 = e.cf.centroid_d2(point);
                if best.is_none_or(|(b, _)| d2 < b) {
                    best = Some((d2, i));
                }
            }
            let candidate = Cf::from_point(point);
            if let Some((_, i)) = best {
                let mut merged = entries[i].cf.clone();
                merged.add(&candidate);
                if merged.radius() <= params.threshold {
                    entries[i].cf = merged;
                    entries[i].rows.push(row);
                    return Insert::Done;
                }
            }
            entries.push(LeafEntry {
                cf: candidate,
                rows: vec![row],
            });
            if entries.len() > params.branching {
                let (a, b) = split_leaf(std::mem::take(entries));
                Insert::Split(Node::Leaf(a), Node::Leaf(b))
            } else {
                Insert::Done
            }
        }
        Node::Internal(children) => {
            let mut best = (f64::INFINITY, 0usize);
            for (i, (cf, _)) in children.iter().enumerate() {
                let d2 = cf.centroid_d2(point);
                if d2 < best.0 {
                    best = (d2, i);
                }
            }
            let i = best.1;
            children[i].0.add(&Cf::from_point(point));
            match insert(&mut children[i].1, point, row, params) {
                Insert::Done => Insert::Done,
                Insert::Split(a, b) => {
                    let cf_a = node_cf(&a);
                    let cf_b = node_cf(&b);
                    children[i] = (cf_a, a);
                    children.insert(i + 1, (cf_b, b));
                    if children.len() > params.branching {
                        let (l, r) = split_internal(std::mem::take(children));
                        Insert::Split(Node::Internal(l), Node::Internal(r))
                    } else {
                        Insert::Done
                    }
                }
            }
        }
    }
}

fn node_cf(node: &Node) -> Cf {
    match node {
        Node::Leaf(entries) => {
            let mut cf = entries[0].cf.clone();
            for e in &entries[1..] {
                cf.add(&e.cf);
            }
            cf
        }
        Node::Internal(children) => {
            let mut cf = children[0].0.clone();
            for (c, _) in &children[1..] {
                cf.add(c);
            }
            cf
        }
    }
}

/// Split by the farthest centroid pair as seeds, remaining entries joining
/// the nearer seed (ties to the first seed); order within halves is kept.
fn split_by_seeds<T>(items: Vec<T>, centroid: impl Fn(&T) -> Vec<f64>) -> (Vec<T>, Vec<T>) {
    let cents: Vec<Vec<f64>> = items.iter().map(&centroid).collect();
    let mut seeds = (0usize, 1usize);
    let mut far = f64::NEG_INFINITY;
    for i in 0..cents.len() {
        for j in (i + 1)..cents.len() {
            let d2 = squared_distance(&cents[i], &cents[j]);
            if d2 > far {
                far = d2;
                seeds = (i, j);
            }
        }
    }
    let (sa, sb) = (cents[seeds.0].clone(), cents[seeds.1].clone());
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        if i == seeds.0 {
            left.push(item);
        } else if i == seeds.1 {
            right.push(item);
        } else if squared_distance(&cents[i], &sa) <= squared_distance(&cents[i], &sb) {
            left.push(item);
        } else {
            right.push(item);
        }
    }
    (left, right)
}

fn split_leaf(entries: Vec<LeafEntry>) -> (Vec<LeafEntry>, Vec<LeafEntry>) {
    split_by_seeds(entries, |e| e.cf.centroid())
}

type Children = Vec<(Cf, Node)>;

fn split_internal(children: Children) -> (Children, Children) {
    split_by_seeds(children, |(cf, _)| cf.centroid())
}

fn collect_leaves(node: Node, out: &mut Vec<LeafEntry>) {
    match node {
        Node::Leaf(entries) => out.extend(entries),
        Node::Internal(children) => {
            for (_, child) in children {
                collect_leaves(child, out);
            }
        }
    }
}

pub fn birch_cluster(table: &FeatureTable, k: usize, params: &BirchParams) -> Result<Clustering> {
    let n = table.len();
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "birch needs 1 <= k <= rows, got k={k} for {n} rows"
        )));
    }
    if !(params.threshold.is_finite() && params.threshold >= 0.0) {
        return Err(Error::Config(format!(
            "birch threshold must be finite and >= 0, got {}",
            params.threshold
        )));
    }
    if params.branching < 2 {
        return Err(Error::Config(format!(
            "birch branching factor must be >= 2, got {}",
            params.branching
        )));
    }

    let mut root = Node::Leaf(Vec::new());
    for (row, r) in table.rows().iter().enumerate() {
        if let Insert::Split(a, b) = insert(&mut root, &r.values, row, params) {
            root = Node::Internal(vec![(node_cf(&a), a), (node_cf(&b), b)]);
        }
    }

    let mut entries = Vec::new();
    collect_leaves(root, &mut entries);
    if entries.len() < k {
        return Err(Error::ThresholdTooCoarse {
            entries: entries.len(),
            k,
        });
    }

    // Global step: agglomerative average linkage over entry centroids,
    // weighted by entry population.
    let cents: Vec<Vec<f64>> = entries.iter().map(|e| e.cf.centroid()).collect();
    let dist: Vec<Vec<f64>> = (0..cents.len())
        .map(|i| {
            (0..cents.len())
                .map(|j| squared_distance(&cents[i], &cents[j]).sqrt())
                .collect()
        })
        .collect();

    let mut groups: Vec<Vec<usize>> = (0..entries.len()).map(|i| vec![i]).collect();
    while groups.len() > k {
        let mut best = (f64::INFINITY, 0usize, 1usize);
        for a in 0..groups.len() {
            for b in (a + 1)..groups.len() {
                let mut num = 0.0;
                let mut den = 0.0;
                for &i in &groups[a] {
                    for &j in &groups[b] {
                        let w = (entries[i].cf.n * entries[j].cf.n) as f64;
                        num += w * dist[i][j];
                        den += w;
                    }
                }
                let d = num / den;
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let merged = groups.remove(b);
        groups[a].extend(merged);
    }

    let mut assignment = vec![usize::MAX; n];
    let mut centers = Vec::with_capacity(k);
    for (cluster, group) in groups.iter().enumerate() {
        let mut cf = entries[group[0]].cf.clone();
        for &i in &group[1..] {
            cf.add(&entries[i].cf);
        }
        centers.push(cf.centroid());
        for &i in group {
            for &row in &entries[i].rows {
                assignment[row] = cluster;
            }
        }
    }

    Clustering {
        k,
        assignment,
        centers,
    }
    .validated()
}
