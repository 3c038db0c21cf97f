//! Intensity preprocessing and proxy-label generation.
//!
//! CT: clip to [-1024, 1024] HU and rescale to [0, 1].
//! MR: z-score, clip to the [1st, 99th] percentiles of the z-scores, then
//! min-max rescale the clipped range to [0, 1].
//!
//! Neither pipeline is idempotent: re-running CT preprocessing on an already
//! rescaled volume clips nothing and remaps [0, 1] to [0.5, 0.500488...],
//! and MR re-normalizes whatever it is given.

use crate::error::{Error, Result};
use crate::numeric::percentile;
use crate::volume::{VolumeGrid, VoxelKind};

pub const OTSU_DEFAULT_BINS: usize = 256;

const CT_CLIP: f64 = 1024.0;

fn require_intensity(v: &VolumeGrid) -> Result<()> {
    if v.kind() != VoxelKind::Intensity {
        return Err(Error::KindMismatch {
            expected: "intensity",
            actual: v.kind().name(),
        });
    }
    Ok(())
}

fn require_finite(v: &VolumeGrid) -> Result<()> {
    if let Some(index) = v.voxels().iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteVoxel { index });
    }
    Ok(())
}

/// `(clip(x, -1024, 1024) + 1024) / 2048`, elementwise.
pub fn preprocess_ct(v: &VolumeGrid) -> Result<VolumeGrid> {
    require_intensity(v)?;
    require_finite(v)?;
    let out = v
        .voxels()
        .iter()
        .map(|&x| (x.clamp(-CT_CLIP, CT_CLIP) + CT_CLIP) / (2.0 * CT_CLIP))
        .collect();
    v.map_values(VoxelKind::Intensity, out)
}

/// Z-score, percentile clip, min-max rescale; errors on constant volumes.
pub fn preprocess_mr(v: &VolumeGrid) -> Result<VolumeGrid> {
    require_intensity(v)?;
    require_finite(v)?;
    let (mean, std) = crate::numeric::mean_pop_std(v.voxels());
    if std == 0.0 {
        return Err(Error::DegenerateInput(
            "constant volume has zero standard deviation".into(),
        ));
    }
    let z: Vec<f64> = v.voxels().iter().map(|&x| (x - mean) / std).collect();
    let mut sorted = z.clone();
    sorted.sort_by(f64::total_cmp);
    let p_lo = percentile(&sorted, 0.01);
    let p_hi = percentile(&sorted, 0.99);
    if p_hi <= p_lo {
        return Err(Error::DegenerateInput(
            "percentile range collapsed to a point".into(),
        ));
    }
    let scale = p_hi - p_lo;
    let out = z
        .into_iter()
        .map(|x| (x.clamp(p_lo, p_hi) - p_lo) / scale)
        .collect();
    v.map_values(VoxelKind::Intensity, out)
}

/// Otsu threshold over a `bins`-bin histogram of values in [0, 1].
///
/// Splits are taken between bins: for every split index `s` the background
/// class is bins `[0, s)` and the foreground class bins `[s, bins)`; the
/// between-class variance `w0·w1·(mu0 - mu1)^2` is maximized and ties go to
/// the lowest split. The returned threshold is the center of bin `s`, i.e.
/// `(s + 0.5) / bins`, so [`apply_threshold`] with `>= t` reproduces the
/// histogram classes for every value outside the split bin itself.
pub fn otsu_threshold(v: &VolumeGrid, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Config(format!("otsu needs >= 2 bins, got {bins}")));
    }
    if let Some(i) = v
        .voxels()
        .iter()
        .position(|x| !x.is_finite() || !(0.0..=1.0).contains(x))
    {
        return Err(Error::Input(format!(
            "otsu input voxel {i} is {}, expected in [0, 1]",
            v.voxels()[i]
        )));
    }

    let mut hist = vec![0u64; bins];
    for &x in v.voxels() {
        let b = ((x * bins as f64) as usize).min(bins - 1);
        hist[b] += 1;
    }
    if hist.iter().filter(|&&h| h > 0).count() < 2 {
        return Err(Error::DegenerateInput(
            "all voxels fall into a single histogram bin".into(),
        ));
    }

    let total: f64 = v.len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(b, &h)| (b as f64 + 0.5) * h as f64)
        .sum();

    let mut best_split = 0;
    let mut best_var = f64::NEG_INFINITY;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for s in 1..bins {
        let h = hist[s - 1] as f64;
        w0 += h;
        sum0 += (s as f64 - 0.5) * h;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (total_sum - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_split = s;
        }
    }
    Ok((best_split as f64 + 0.5) / bins as f64)
}

/// Binarize at `t`: voxel >= t becomes foreground.
pub fn apply_threshold(v: &VolumeGrid, t: f64) -> Result<VolumeGrid> {
    let out = v
        .voxels()
        .iter()
        .map(|&x| if x >= t { 1.0 } else { 0.0 })
        .collect();
    v.map_values(VoxelKind::BinaryMask, out)
}

/// CT pseudo-label: voxel is foreground iff `lo <= HU <= hi`. The window is
/// organ-dependent and must be supplied by configuration.
pub fn proxy_label_ct(v: &VolumeGrid, window: (f64, f64)) -> Result<VolumeGrid> {
    let (lo, hi) = window;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Config(format!(
            "HU window lower bound {lo} must be below upper bound {hi}"
        )));
    }
    require_intensity(v)?;
    let out = v
        .voxels()
        .iter()
        .map(|&x| if lo <= x && x <= hi { 1.0 } else { 0.0 })
        .collect();
    v.map_values(VoxelKind::BinaryMask, out)
}

/// MR pseudo-label: preprocess, Otsu-threshold, binarize.
pub fn proxy_label_mr(v: &VolumeGrid) -> Result<VolumeGrid> {
    let pre = preprocess_mr(v)?;
    let t = otsu_threshold(&pre, OTSU_DEFAULT_BINS)?;
    apply_threshold(&pre, t)
}
