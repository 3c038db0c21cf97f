//! Prepared selector inputs: ids plus optional features, prediction stacks
//! and per-sample ROIs, assembled from volumes or from precomputed files.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::{extract_descriptor, standardize, FeatureTable};
use crate::uncertainty::{
    aggregate, entropy_map, variance_map, Measure, PredictionStack, UncertaintyScore,
};
use crate::volume::{
    check_unique_ids, preprocess_ct, preprocess_mr, roi_from_mask, Modality, PoolSample, RoiBox,
    RoiMode,
};

/// Ground-truth boxes are expanded by this many voxels per direction.
pub const ROI_MARGIN: usize = 5;

#[derive(Debug, Clone)]
pub struct SelectorParams {
    /// Descriptor pooling grid g (descriptor dimension is 2g^3).
    pub descriptor_grid: usize,
    pub kmeans_restarts: usize,
    pub birch_threshold: f64,
    pub birch_branching: usize,
}

impl Default for SelectorParams {
    fn default() -> Self {
        SelectorParams {
            descriptor_grid: 4,
            kmeans_restarts: 10,
            birch_threshold: 0.5,
            birch_branching: 50,
        }
    }
}

/// Everything a strategy can draw on for one pool.
#[derive(Debug, Clone)]
pub struct SelectorPool {
    ids: Vec<String>,
    features: Option<FeatureTable>,
    stacks: Option<Arc<Vec<PredictionStack>>>,
    rois: Option<BTreeMap<String, RoiBox>>,
    /// The mode the features were extracted under; scores follow the mode
    /// requested at aggregation time instead.
    prepared_mode: RoiMode,
}

impl SelectorPool {
    /// Build from volumes: preprocess each image for its modality, extract
    /// descriptors (cropped to the ground-truth ROI in local mode), and
    /// standardize the table. Local mode requires masks on every sample.
    pub fn from_samples(
        samples: &[PoolSample],
        roi_mode: RoiMode,
        params: &SelectorParams,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("empty pool".into()));
        }
        check_unique_ids(samples.iter().map(|s| s.id.as_str()))?;
        let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();

        let rois = match roi_mode {
            RoiMode::Global => None,
            RoiMode::Local => {
                let mut map = BTreeMap::new();
                for s in samples {
                    let mask = s.gt_mask.as_ref().ok_or(Error::MissingMasks)?;
                    map.insert(s.id.clone(), roi_from_mask(mask, ROI_MARGIN)?);
                }
                Some(map)
            }
        };

        let mut rows = Vec::with_capacity(samples.len());
        for s in samples {
            let image = match s.modality {
                Modality::Ct => preprocess_ct(&s.image)?,
                Modality::Mr => preprocess_mr(&s.image)?,
                // synthetic volumes are generated in [0, 1]
                Modality::Synthetic => s.image.clone(),
            };
            let roi = rois.as_ref().map(|m| m[&s.id]);
            rows.push(extract_descriptor(
                &s.id,
                &image,
                params.descriptor_grid,
                roi.as_ref(),
            )?);
        }
        let table = FeatureTable::new(rows)?;
        let table = if table.len() >= 2 {
            standardize(&table)?
        } else {
            table
        };

        Ok(SelectorPool {
            ids,
            features: Some(table),
            stacks: None,
            rois,
            prepared_mode: roi_mode,
        })
    }

    /// Wrap a precomputed feature table (diversity and random strategies).
    pub fn from_features(table: FeatureTable, roi_mode: RoiMode) -> Self {
        SelectorPool {
            ids: table.ids().map(str::to_string).collect(),
            features: Some(table),
            stacks: None,
            rois: None,
            prepared_mode: roi_mode,
        }
    }

    /// Wrap precomputed prediction stacks (proxy and random strategies).
    pub fn from_stacks(stacks: Vec<PredictionStack>, roi_mode: RoiMode) -> Result<Self> {
        if stacks.is_empty() {
            return Err(Error::Input("no prediction stacks".into()));
        }
        check_unique_ids(stacks.iter().map(|s| s.id.as_str()))?;
        Ok(SelectorPool {
            ids: stacks.iter().map(|s| s.id.clone()).collect(),
            features: None,
            stacks: Some(Arc::new(stacks)),
            rois: None,
            prepared_mode: roi_mode,
        })
    }

    /// Attach prediction stacks, one per pool id, same order.
    pub fn with_stacks(mut self, stacks: Arc<Vec<PredictionStack>>) -> Result<Self> {
        if stacks.len() != self.ids.len()
            || stacks.iter().zip(&self.ids).any(|(s, id)| &s.id != id)
        {
            return Err(Error::Input(
                "stacks must match pool ids one-to-one, in order".into(),
            ));
        }
        self.stacks = Some(stacks);
        Ok(self)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub(crate) fn check_roi_mode(&self, requested: RoiMode) -> Result<()> {
        if requested != self.prepared_mode {
            return Err(Error::Config(format!(
                "pool inputs were prepared for {} mode, requested {}",
                self.prepared_mode.name(),
                requested.name()
            )));
        }
        Ok(())
    }

    /// Features, standardized on demand. Single-row tables pass through
    /// as-is (nothing to standardize, selection is forced anyway).
    pub fn standardized_features(&self) -> Result<FeatureTable> {
        let table = self.features.as_ref().ok_or_else(|| {
            Error::Input("diversity strategies require a feature table".into())
        })?;
        if table.standardized() || table.len() < 2 {
            Ok(table.clone())
        } else {
            standardize(table)
        }
    }

    /// Per-sample uncertainty scores under `measure`; local mode aggregates
    /// over each stack's ROI (or the pool's ground-truth ROI).
    pub fn uncertainty_scores(
        &self,
        measure: Measure,
        roi_mode: RoiMode,
    ) -> Result<Vec<UncertaintyScore>> {
        let stacks = self.stacks.as_ref().ok_or_else(|| {
            Error::Input("proxy strategies require prediction stacks".into())
        })?;
        let mut scores = Vec::with_capacity(stacks.len());
        for stack in stacks.iter() {
            let map = match measure {
                Measure::Entropy => entropy_map(stack),
                Measure::Variance => variance_map(stack),
            };
            let roi = match roi_mode {
                RoiMode::Global => None,
                RoiMode::Local => Some(
                    stack
                        .roi
                        .or_else(|| self.rois.as_ref().and_then(|m| m.get(&stack.id).copied()))
                        .ok_or(Error::MissingMasks)?,
                ),
            };
            scores.push(UncertaintyScore {
                id: stack.id.clone(),
                measure,
                score: aggregate(&map, roi.as_ref())?,
                roi_mode,
            });
        }
        Ok(scores)
    }

    /// The ROI map (present in local mode built from masked samples).
    pub fn rois(&self) -> Option<&BTreeMap<String, RoiBox>> {
        self.rois.as_ref()
    }
}
