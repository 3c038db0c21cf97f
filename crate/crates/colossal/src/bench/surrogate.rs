//! The surrogate segmenter: a nearest-prototype voxel classifier.
//!
//! Each voxel is described by six features — intensity, 3^3-box local mean
//! and std, and the normalized coordinates x/X, y/Y, z/Z. Training computes
//! per-dimension standardization statistics over all training voxels and one
//! mean descriptor (prototype) per class; prediction assigns every voxel to
//! the nearest prototype. It is deterministic, trains in milliseconds, and
//! improves with representative training data, which is all the selection
//! benchmark asks of a learner.
//!
//! Monte-Carlo style stochastic prediction perturbs every prototype with
//! seeded Gaussian noise per run, yielding a prediction stack whose
//! disagreement plays the role of dropout uncertainty.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive, SplitMix64};
use crate::uncertainty::PredictionStack;
use crate::volume::{VolumeGrid, VoxelKind};

pub const DESCRIPTOR_DIM: usize = 6;

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    feat_mean: [f64; DESCRIPTOR_DIM],
    feat_std: [f64; DESCRIPTOR_DIM],
    /// `(class, prototype)` sorted by class index.
    prototypes: Vec<(u8, [f64; DESCRIPTOR_DIM])>,
    /// Classes absent from every training mask; prediction never emits them.
    missing_classes: Vec<u8>,
}

impl SurrogateModel {
    pub fn prototypes(&self) -> &[(u8, [f64; DESCRIPTOR_DIM])] {
        &self.prototypes
    }

    pub fn missing_classes(&self) -> &[u8] {
        &self.missing_classes
    }

    pub fn normalization(&self) -> ([f64; DESCRIPTOR_DIM], [f64; DESCRIPTOR_DIM]) {
        (self.feat_mean, self.feat_std)
    }
}

fn voxel_descriptor(image: &VolumeGrid, x: usize, y: usize, z: usize) -> [f64; DESCRIPTOR_DIM] {
    let dims = image.dims();
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut cnt = 0usize;
    for dz in -1i64..=1 {
        let nz = z as i64 + dz;
        if nz < 0 || nz >= dims[2] as i64 {
            continue;
        }
        for dy in -1i64..=1 {
            let ny = y as i64 + dy;
            if ny < 0 || ny >= dims[1] as i64 {
                continue;
            }
            for dx in -1i64..=1 {
                let nx = x as i64 + dx;
                if nx < 0 || nx >= dims[0] as i64 {
                    continue;
                }
                let v = image.get(nx as usize, ny as usize, nz as usize);
                sum += v;
                sq += v * v;
                cnt += 1;
            }
        }
    }
    let mean = sum / cnt as f64;
    let var = (sq / cnt as f64 - mean * mean).max(0.0);
    [
        image.get(x, y, z),
        mean,
        var.sqrt(),
        x as f64 / dims[0] as f64,
        y as f64 / dims[1] as f64,
        z as f64 / dims[2] as f64,
    ]
}

fn descriptors_of(image: &VolumeGrid) -> Vec<[f64; DESCRIPTOR_DIM]> {
    let dims = image.dims();
    let mut out = Vec::with_capacity(image.len());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                out.push(voxel_descriptor(image, x, y, z));
            }
        }
    }
    out
}

/// Train on `(id, image, mask)` triples. Samples are processed in ascending
/// id order regardless of input order, so two selections of the same set
/// train bit-identical models.
pub fn surrogate_train(labeled: &[(&str, &VolumeGrid, &VolumeGrid)]) -> Result<SurrogateModel> {
    if labeled.is_empty() {
        return Err(Error::Input("surrogate training needs >= 1 sample".into()));
    }
    crate::volume::check_unique_ids(labeled.iter().map(|(id, _, _)| *id))?;
    let mut ordered: Vec<&(&str, &VolumeGrid, &VolumeGrid)> = labeled.iter().collect();
    ordered.sort_by_key(|(id, _, _)| *id);
    for (id, image, mask) in &ordered {
        if mask.kind() != VoxelKind::BinaryMask {
            return Err(Error::KindMismatch {
                expected: "binary-mask",
                actual: mask.kind().name(),
            });
        }
        if image.dims() != mask.dims() {
            return Err(Error::DimMismatch(format!(
                "sample {id}: image dims {:?} vs mask dims {:?}",
                image.dims(),
                mask.dims()
            )));
        }
    }

    let per_volume: Vec<Vec<[f64; DESCRIPTOR_DIM]>> = ordered
        .iter()
        .map(|(_, image, _)| descriptors_of(image))
        .collect();

    let mut sum = [0.0; DESCRIPTOR_DIM];
    let mut total = 0usize;
    for descs in &per_volume {
        for d in descs {
            for (s, v) in sum.iter_mut().zip(d) {
                *s += v;
            }
        }
        total += descs.len();
    }
    let mut feat_mean = [0.0; DESCRIPTOR_DIM];
    for (m, s) in feat_mean.iter_mut().zip(&sum) {
        *m = s / total as f64;
    }
    let mut sq = [0.0; DESCRIPTOR_DIM];
    for descs in &per_volume {
        for d in descs {
            for (i, v) in d.iter().enumerate() {
                let c = v - feat_mean[i];
                sq[i] += c * c;
            }
        }
    }
    let mut feat_std = [0.0; DESCRIPTOR_DIM];
    for (out, s) in feat_std.iter_mut().zip(&sq) {
        let std = (s / total as f64).sqrt();
        *out = if std < 1e-12 { 1.0 } else { std };
    }

    let mut class_sum = [[0.0; DESCRIPTOR_DIM]; 2];
    let mut class_count = [0usize; 2];
    for ((_, _, mask), descs) in ordered.iter().zip(&per_volume) {
        for (d, &label) in descs.iter().zip(mask.voxels()) {
            let class = (label == 1.0) as usize;
            class_count[class] += 1;
            for i in 0..DESCRIPTOR_DIM {
                class_sum[class][i] += (d[i] - feat_mean[i]) / feat_std[i];
            }
        }
    }

    let mut prototypes = Vec::new();
    let mut missing_classes = Vec::new();
    for class in 0..2u8 {
        let count = class_count[class as usize];
        if count == 0 {
            missing_classes.push(class);
            continue;
        }
        let mut proto = [0.0; DESCRIPTOR_DIM];
        for (p, s) in proto.iter_mut().zip(&class_sum[class as usize]) {
            *p = s / count as f64;
        }
        prototypes.push((class, proto));
    }

    Ok(SurrogateModel {
        feat_mean,
        feat_std,
        prototypes,
        missing_classes,
    })
}

fn classify(
    model_mean: &[f64; DESCRIPTOR_DIM],
    model_std: &[f64; DESCRIPTOR_DIM],
    prototypes: &[(u8, [f64; DESCRIPTOR_DIM])],
    desc: &[f64; DESCRIPTOR_DIM],
) -> u8 {
    let mut std_desc = [0.0; DESCRIPTOR_DIM];
    for i in 0..DESCRIPTOR_DIM {
        std_desc[i] = (desc[i] - model_mean[i]) / model_std[i];
    }
    let mut best = (f64::INFINITY, 0u8);
    for (class, proto) in prototypes {
        let mut d2 = 0.0;
        for i in 0..DESCRIPTOR_DIM {
            let d = std_desc[i] - proto[i];
            d2 += d * d;
        }
        // strict less keeps the lower class index on ties
        if d2 < best.0 {
            best = (d2, *class);
        }
    }
    best.1
}

fn predict_with(
    model: &SurrogateModel,
    prototypes: &[(u8, [f64; DESCRIPTOR_DIM])],
    image: &VolumeGrid,
) -> VolumeGrid {
    let dims = image.dims();
    let voxels: Vec<f64> = (0..dims[2])
        .into_par_iter()
        .flat_map_iter(|z| {
            let mut slice = Vec::with_capacity(dims[0] * dims[1]);
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let desc = voxel_descriptor(image, x, y, z);
                    let class =
                        classify(&model.feat_mean, &model.feat_std, prototypes, &desc);
                    slice.push(if class == 1 { 1.0 } else { 0.0 });
                }
            }
            slice
        })
        .collect();
    VolumeGrid::new(dims, image.spacing(), VoxelKind::Probability, voxels)
        .expect("indicator values are valid probabilities")
}

/// Deterministic prediction: foreground-indicator probability grid.
pub fn surrogate_predict(model: &SurrogateModel, image: &VolumeGrid) -> VolumeGrid {
    predict_with(model, &model.prototypes, image)
}

/// Stochastic prediction: `runs` passes, each perturbing every prototype
/// dimension with `sigma`-scaled seeded Gaussian noise (run `t` draws from
/// the substream `derive(seed, t)`).
pub fn surrogate_predict_stack(
    model: &SurrogateModel,
    image: &VolumeGrid,
    id: &str,
    runs: usize,
    sigma: f64,
    seed: u64,
) -> Result<PredictionStack> {
    let grids: Vec<VolumeGrid> = (0..runs)
        .map(|t| {
            let mut rng = SplitMix64::new(derive(seed, t as u64));
            let perturbed: Vec<(u8, [f64; DESCRIPTOR_DIM])> = model
                .prototypes
                .iter()
                .map(|(class, proto)| {
                    let mut p = *proto;
                    for v in p.iter_mut() {
                        *v += sigma * rng.next_gaussian();
                    }
                    (*class, p)
                })
                .collect();
            predict_with(model, &perturbed, image)
        })
        .collect();
    PredictionStack::new(id, grids, None)
}
