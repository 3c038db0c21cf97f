//! Lloyd's k-means with k-means++ seeding, fully deterministic.
//!
//! All randomness comes from [`SplitMix64`](crate::rng::SplitMix64); restart
//! `r` uses seed `seed + r`. The winner is the restart with the lowest
//! within-cluster sum of squares, ties broken by the lower restart index, so
//! the result is a pure function of `(table, k, seed, n_init)`. All
//! nearest-center ties go to the lowest center index.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::numeric::squared_distance;
use crate::rng::SplitMix64;

pub const KMEANS_MAX_ITERS: usize = 300;

pub fn kmeans(table: &FeatureTable, k: usize, seed: u64, n_init: usize) -> Result<Clustering> {
    let n = table.len();
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "kmeans needs 1 <= k <= rows, got k={k} for {n} rows"
        )));
    }
    let n_init = n_init.max(1);
    let points: Vec<&[f64]> = table.rows().iter().map(|r| r.values.as_slice()).collect();

    let mut best: Option<(f64, Clustering)> = None;
    for restart in 0..n_init {
        let run = lloyd(&points, k, seed.wrapping_add(restart as u64));
        let wcss = run.0;
        match &best {
            Some((best_wcss, _)) if wcss >= *best_wcss => {}
            _ => best = Some((wcss, run.1)),
        }
    }
    best.expect("at least one restart").1.validated()
}

/// One seeded restart; returns (wcss, clustering).
fn lloyd(points: &[&[f64]], k: usize, seed: u64) -> (f64, Clustering) {
    let n = points.len();
    let d = points[0].len();
    let mut rng = SplitMix64::new(seed);
    let mut centers = plus_plus_init(points, k, &mut rng);

    let mut assignment = vec![usize::MAX; n];
    let mut prev_wcss = f64::INFINITY;
    for _iter in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest_center(p, &centers).0;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }

        // Repair empty clusters by stealing the point farthest from its
        // current center, never draining a cluster below one member.
        let mut counts = vec![0usize; k];
        for &c in &assignment {
            counts[c] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let mut steal: Option<(f64, usize)> = None;
            for (i, p) in points.iter().enumerate() {
                if counts[assignment[i]] < 2 {
                    continue;
                }
                let dist = squared_distance(p, &centers[assignment[i]]);
                if steal.is_none_or(|(best, _)| dist > best) {
                    steal = Some((dist, i));
                }
            }
            let (_, i) = steal.expect("k <= n guarantees a donor cluster");
            counts[assignment[i]] -= 1;
            assignment[i] = empty;
            counts[empty] = 1;
            centers[empty] = points[i].to_vec();
            changed = true;
        }

        // Means of the members, accumulated in row order.
        let mut next = vec![vec![0.0; d]; k];
        for (i, p) in points.iter().enumerate() {
            for (acc, v) in next[assignment[i]].iter_mut().zip(*p) {
                *acc += v;
            }
        }
        for (c, center) in next.iter_mut().enumerate() {
            for v in center.iter_mut() {
                *v /= counts[c] as f64;
            }
        }
        centers = next;

        let wcss = wcss_of(points, &assignment, &centers);
        debug_assert!(
            wcss <= prev_wcss * (1.0 + 1e-12) + 1e-9,
            "wcss increased: {prev_wcss} -> {wcss}"
        );
        prev_wcss = wcss;

        if !changed {
            break;
        }
    }

    (
        wcss_of(points, &assignment, &centers),
        Clustering {
            k,
            assignment,
            centers,
        },
    )
}

/// Greedy k-means++, the common library variant: the first center is
/// uniform; each later center draws `2 + ⌊ln k⌋` candidates from the
/// squared-distance distribution (cumulative-sum inversion of one uniform
/// draw each) and keeps the candidate that minimizes the resulting
/// potential, ties to the earliest draw. If no remaining point carries
/// mass, the lowest-index point not already chosen is taken.
fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let first = rng.range(n);
    let mut chosen = vec![first];
    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, points[first]))
        .collect();

    while chosen.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            let mut best: Option<(f64, usize)> = None;
            for _ in 0..trials {
                let candidate = sample_by_mass(&min_d2, rng.next_f64() * total);
                let potential: f64 = points
                    .iter()
                    .zip(&min_d2)
                    .map(|(p, &d)| d.min(squared_distance(p, points[candidate])))
                    .sum();
                if best.is_none_or(|(bp, _)| potential < bp) {
                    best = Some((potential, candidate));
                }
            }
            best.expect("at least one trial").1
        } else {
            (0..n)
                .find(|i| !chosen.contains(i))
                .expect("k <= n leaves an unchosen point")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d2 = squared_distance(p, points[next]);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
    }
    chosen.into_iter().map(|i| points[i].to_vec()).collect()
}

/// First index whose cumulative mass exceeds `target`; rounding can leave
/// `target` past the last positive entry, which then wins.
fn sample_by_mass(mass: &[f64], target: f64) -> usize {
    let mut cum = 0.0;
    for (i, &w) in mass.iter().enumerate() {
        cum += w;
        if target < cum {
            return i;
        }
    }
    mass.iter()
        .rposition(|&w| w > 0.0)
        .expect("positive total mass")
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d2 = squared_distance(p, center);
        if d2 < best.1 {
            best = (c, d2);
        }
    }
    best
}

fn wcss_of(points: &[&[f64]], assignment: &[usize], centers: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| squared_distance(p, &centers[c]))
        .sum()
}
