//! Deterministic clustering primitives for the diversity selectors.

mod birch;
mod kmeans;

pub use birch::{birch_cluster, BirchParams};
pub use kmeans::{kmeans, KMEANS_MAX_ITERS};

use crate::error::{Error, Result};
use crate::features::FeatureTable;

/// A hard partition of the table rows into `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// `assignment[row] = cluster index in [0, k)`.
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

impl Clustering {
    pub(crate) fn validated(self) -> Result<Self> {
        if self.centers.len() != self.k {
            return Err(Error::Input(format!(
                "{} centers for k={}",
                self.centers.len(),
                self.k
            )));
        }
        let mut counts = vec![0usize; self.k];
        for &c in &self.assignment {
            if c >= self.k {
                return Err(Error::Input(format!("assignment {c} out of range")));
            }
            counts[c] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Input(format!("cluster {empty} is empty")));
        }
        if self
            .centers
            .iter()
            .any(|c| c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Input("non-finite cluster center".into()));
        }
        Ok(self)
    }

    /// Row indices of each cluster, in row order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (row, &c) in self.assignment.iter().enumerate() {
            out[c].push(row);
        }
        out
    }
}

/// Debug dump of a clustering as `id,cluster` CSV rows in table order.
pub fn assignments_csv(table: &FeatureTable, clustering: &Clustering) -> String {
    let mut out = String::from("id,cluster\n");
    for (row, cluster) in table.rows().iter().zip(&clustering.assignment) {
        out.push_str(&format!("{},{cluster}\n", row.id));
    }
    out
}

/// Symmetric matrix of pairwise Euclidean distances between table rows.
pub fn pairwise_euclidean(table: &FeatureTable) -> Vec<Vec<f64>> {
    let n = table.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = crate::numeric::euclidean(&table.rows()[i].values, &table.rows()[j].values);
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    m
}

/// Cosine similarity; any zero vector has similarity 0 with everything.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!(
            "cosine of {}-dim and {}-dim vectors",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;

    #[test]
    fn assignments_dump_lists_every_row() {
        let rows = vec![
            FeatureVector::new("a", vec![0.0]).unwrap(),
            FeatureVector::new("b", vec![0.1]).unwrap(),
            FeatureVector::new("c", vec![9.0]).unwrap(),
        ];
        let t = FeatureTable::new(rows).unwrap();
        let c = kmeans(&t, 2, 0, 5).unwrap();
        let csv = assignments_csv(&t, &c);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "id,cluster");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("a,"));
    }

    #[test]
    fn cosine_of_self_is_one() {
        let v = [3.0, -4.0, 1.0];
        assert!((cosine_sim(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_orthonormal_axes_is_zero() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine_sim(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_dim_mismatch_errors() {
        assert!(cosine_sim(&[1.0], &[1.0, 2.0]).is_err());
    }

    // Oracle: naive loops.
    #[test]
    fn pairwise_and_cosine_match_naive() {
        let mut rng = crate::rng::SplitMix64::new(19);
        let rows: Vec<FeatureVector> = (0..12)
            .map(|i| {
                FeatureVector::new(
                    format!("r{i}"),
                    (0..5).map(|_| rng.next_f64() * 4.0 - 2.0).collect(),
                )
                .unwrap()
            })
            .collect();
        let t = FeatureTable::new(rows).unwrap();
        let m = pairwise_euclidean(&t);
        for i in 0..12 {
            assert_eq!(m[i][i], 0.0);
            for j in 0..12 {
                let mut s = 0.0;
                for d in 0..5 {
                    let diff = t.rows()[i].values[d] - t.rows()[j].values[d];
                    s += diff * diff;
                }
                assert!((m[i][j] - s.sqrt()).abs() < 1e-12);
                assert_eq!(m[i][j], m[j][i]);

                let a = &t.rows()[i].values;
                let b = &t.rows()[j].values;
                let mut dot = 0.0;
                let mut na = 0.0;
                let mut nb = 0.0;
                for d in 0..5 {
                    dot += a[d] * b[d];
                    na += a[d] * a[d];
                    nb += b[d] * b[d];
                }
                let expect = dot / (na.sqrt() * nb.sqrt());
                assert!((cosine_sim(a, b).unwrap() - expect).abs() < 1e-12);
            }
        }
    }
}
