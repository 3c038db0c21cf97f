//! Selection results and their on-disk JSON form.
//!
//! Keys, pinned: `strategy`, `budget`, `seed` (null for unseeded
//! strategies), `roi_mode`, `selected` (ordered id array), `scores`
//! (id-keyed diagnostics with the optional fields `score`, `cluster`,
//! `typicality`, `density`, `center_distance`). Serialization is ordered
//! and stable, so identical selections give byte-identical files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selectors::Strategy;
use crate::volume::RoiMode;

/// Per-sample diagnostics; only fields the strategy computed are present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreDetail {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub typicality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub strategy: Strategy,
    pub budget: usize,
    pub seed: Option<u64>,
    pub roi_mode: RoiMode,
    pub selected: Vec<String>,
    pub scores: BTreeMap<String, ScoreDetail>,
}

impl SelectionResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable result");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let result: SelectionResult = serde_json::from_str(text)?;
        result.validate()?;
        Ok(result)
    }

    /// Structural invariants: |selected| = budget, distinct ids.
    pub fn validate(&self) -> Result<()> {
        if self.selected.len() != self.budget {
            return Err(Error::Input(format!(
                "selection has {} ids for budget {}",
                self.selected.len(),
                self.budget
            )));
        }
        crate::volume::check_unique_ids(self.selected.iter().map(|s| s.as_str()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
