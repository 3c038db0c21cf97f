//! Fixed-length feature vectors per pool sample and the table that holds
//! them: handcrafted pooled-statistics descriptors, pool-wide
//! standardization, and CSV ingestion for externally computed features.

mod csv;
mod descriptor;

pub use csv::{parse_feature_csv, read_feature_table, render_feature_csv, write_feature_table};
pub use descriptor::{adaptive_avg_pool, extract_descriptor, PooledGrid};

use crate::error::{Error, Result};

/// One sample's descriptor: an id and `d` finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::Input(format!("feature vector {id} is empty")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "feature vector {id} has non-finite entry at {i}"
            )));
        }
        Ok(FeatureVector { id, values })
    }
}

/// An ordered set of feature vectors with a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: Vec<FeatureVector>,
    dim: usize,
    standardized: bool,
    norm_mean: Option<Vec<f64>>,
    norm_std: Option<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(rows: Vec<FeatureVector>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("feature table has no rows".into()));
        }
        let dim = rows[0].values.len();
        for row in &rows {
            if row.values.len() != dim {
                return Err(Error::Input(format!(
                    "feature row {} has {} values, expected {dim}",
                    row.id,
                    row.values.len()
                )));
            }
        }
        crate::volume::check_unique_ids(rows.iter().map(|r| r.id.as_str()))?;
        Ok(FeatureTable {
            rows,
            dim,
            standardized: false,
            norm_mean: None,
            norm_std: None,
        })
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.id.as_str())
    }

    pub fn standardized(&self) -> bool {
        self.standardized
    }

    /// Per-dimension mean/std captured by [`standardize`], if any.
    pub fn normalization(&self) -> Option<(&[f64], &[f64])> {
        match (&self.norm_mean, &self.norm_std) {
            (Some(m), Some(s)) => Some((m.as_slice(), s.as_slice())),
            _ => None,
        }
    }
}

/// Per-dimension zero-mean unit-variance rescale using the population
/// standard deviation; dimensions with std below 1e-12 are zeroed outright.
pub fn standardize(table: &FeatureTable) -> Result<FeatureTable> {
    let n = table.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "standardization needs >= 2 rows, got {n}"
        )));
    }
    let d = table.dim();
    let mut mean = vec![0.0; d];
    for row in table.rows() {
        for (m, v) in mean.iter_mut().zip(&row.values) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for row in table.rows() {
        for ((s, v), m) in var.iter_mut().zip(&row.values).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();

    let rows = table
        .rows()
        .iter()
        .map(|row| {
            let values = row
                .values
                .iter()
                .zip(&mean)
                .zip(&std)
                .map(|((v, m), s)| if *s < 1e-12 { 0.0 } else { (v - m) / s })
                .collect();
            FeatureVector {
                id: row.id.clone(),
                values,
            }
        })
        .collect();
    Ok(FeatureTable {
        rows,
        dim: d,
        standardized: true,
        norm_mean: Some(mean),
        norm_std: Some(std),
    })
}
