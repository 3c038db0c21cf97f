//! Segmentation evaluation: Dice overlap and the 95% Hausdorff distance.
//!
//! HD95 conventions, pinned: boundary voxels are foreground voxels with at
//! least one background 6-neighbor (out-of-bounds counts as background);
//! distances are Euclidean between voxel centers in physical units; each
//! directed distance set is reduced to its 95th percentile by linear
//! interpolation at rank `0.95·(n-1)`; the result is the maximum of the two
//! directed percentiles. Nearest neighbors are found by exact full scan so
//! an all-pairs oracle agrees to rounding error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::percentile;
use crate::volume::{VolumeGrid, VoxelKind};

/// Dice plus HD95 for one mask pair; `hd95` is absent when either mask is
/// empty (never reported as zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegScore {
    pub dice: f64,
    pub hd95: Option<f64>,
}

fn require_mask(v: &VolumeGrid) -> Result<()> {
    if v.kind() != VoxelKind::BinaryMask {
        return Err(Error::KindMismatch {
            expected: "binary-mask",
            actual: v.kind().name(),
        });
    }
    Ok(())
}

fn require_same_shape(a: &VolumeGrid, b: &VolumeGrid) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch(format!(
            "mask dims {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    if a.spacing() != b.spacing() {
        return Err(Error::DimMismatch(format!(
            "mask spacing {:?} vs {:?}",
            a.spacing(),
            b.spacing()
        )));
    }
    Ok(())
}

/// `2|A∩B| / (|A|+|B|)`; two empty masks have Dice 1 by convention.
pub fn dice(a: &VolumeGrid, b: &VolumeGrid) -> Result<f64> {
    require_mask(a)?;
    require_mask(b)?;
    require_same_shape(a, b)?;
    let mut inter = 0usize;
    let mut na = 0usize;
    let mut nb = 0usize;
    for (x, y) in a.voxels().iter().zip(b.voxels()) {
        let fa = *x == 1.0;
        let fb = *y == 1.0;
        na += fa as usize;
        nb += fb as usize;
        inter += (fa && fb) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Foreground voxels with a background 6-neighbor, as index triples.
fn boundary_voxels(mask: &VolumeGrid) -> Vec<[usize; 3]> {
    let dims = mask.dims();
    let mut out = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if mask.get(x, y, z) != 1.0 {
                    continue;
                }
                let mut edge = false;
                let p = [x as isize, y as isize, z as isize];
                'n: for axis in 0..3 {
                    for step in [-1isize, 1] {
                        let mut q = p;
                        q[axis] += step;
                        if q[axis] < 0 || q[axis] >= dims[axis] as isize {
                            edge = true;
                            break 'n;
                        }
                        if mask.get(q[0] as usize, q[1] as usize, q[2] as usize) != 1.0 {
                            edge = true;
                            break 'n;
                        }
                    }
                }
                if edge {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

fn directed_p95(from: &[[usize; 3]], to: &[[usize; 3]], spacing: [f64; 3]) -> f64 {
    let mut dists: Vec<f64> = from
        .par_iter()
        .map(|a| {
            let mut best = f64::INFINITY;
            for b in to {
                let dx = (a[0] as f64 - b[0] as f64) * spacing[0];
                let dy = (a[1] as f64 - b[1] as f64) * spacing[1];
                let dz = (a[2] as f64 - b[2] as f64) * spacing[2];
                let d2 = dx * dx + dy * dy + dz * dz;
                if d2 < best {
                    best = d2;
                }
            }
            best.sqrt()
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    percentile(&dists, 0.95)
}

/// 95% Hausdorff distance between mask boundaries, in physical units.
pub fn hd95(a: &VolumeGrid, b: &VolumeGrid) -> Result<f64> {
    require_mask(a)?;
    require_mask(b)?;
    require_same_shape(a, b)?;
    let ba = boundary_voxels(a);
    let bb = boundary_voxels(b);
    if ba.is_empty() || bb.is_empty() {
        let which = if ba.is_empty() { "first" } else { "second" };
        return Err(Error::UndefinedMetric(format!(
            "hd95 needs non-empty masks; {which} mask has no foreground"
        )));
    }
    let spacing = a.spacing();
    let d_ab = directed_p95(&ba, &bb, spacing);
    let d_ba = directed_p95(&bb, &ba, spacing);
    Ok(d_ab.max(d_ba))
}

/// Evaluate one pair: Dice always, HD95 absent when undefined.
pub fn seg_score(pred: &VolumeGrid, gt: &VolumeGrid) -> Result<SegScore> {
    let d = dice(pred, gt)?;
    let h = match hd95(pred, gt) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SegScore { dice: d, hd95: h })
}
