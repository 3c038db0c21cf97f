//! 3D volume data model: grids, ROI boxes, pool samples, cropping.

mod format;
mod preprocess;

pub use format::{parse_volume, read_volume, render_volume, write_volume, MAGIC};
pub use preprocess::{
    apply_threshold, otsu_threshold, preprocess_ct, preprocess_mr, proxy_label_ct, proxy_label_mr,
    OTSU_DEFAULT_BINS,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// What the scalar field of a [`VolumeGrid`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoxelKind {
    Intensity,
    BinaryMask,
    Probability,
}

impl VoxelKind {
    pub fn name(self) -> &'static str {
        match self {
            VoxelKind::Intensity => "intensity",
            VoxelKind::BinaryMask => "binary-mask",
            VoxelKind::Probability => "probability",
        }
    }
}

/// Whether a computation looks at the whole volume or only a ground-truth
/// derived region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoiMode {
    Global,
    Local,
}

impl RoiMode {
    pub fn name(self) -> &'static str {
        match self {
            RoiMode::Global => "global",
            RoiMode::Local => "local",
        }
    }
}

impl std::str::FromStr for RoiMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(RoiMode::Global),
            "local" => Ok(RoiMode::Local),
            other => Err(Error::Config(format!("unknown roi mode: {other}"))),
        }
    }
}

/// A dense 3D scalar field with physical voxel spacing.
///
/// Voxels are stored x-fastest: `index = x + X·(y + Y·z)`. Values are held as
/// `f64` in memory regardless of the on-disk dtype.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    dims: [usize; 3],
    spacing: [f64; 3],
    kind: VoxelKind,
    voxels: Vec<f64>,
}

impl VolumeGrid {
    /// Build a grid, validating the kind-specific invariants. Intensity
    /// voxels may be non-finite (preprocessing rejects them per voxel);
    /// masks must be exactly 0/1 and probabilities must lie in `[0, 1]`.
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        kind: VoxelKind,
        voxels: Vec<f64>,
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::DimMismatch(format!(
                "dims must be positive, got {dims:?}"
            )));
        }
        let count = dims[0]
            .checked_mul(dims[1])
            .and_then(|p| p.checked_mul(dims[2]))
            .ok_or_else(|| Error::DimMismatch(format!("dims overflow: {dims:?}")))?;
        if voxels.len() != count {
            return Err(Error::DimMismatch(format!(
                "dims {dims:?} imply {count} voxels, got {}",
                voxels.len()
            )));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::DimMismatch(format!(
                "spacing must be finite and positive, got {spacing:?}"
            )));
        }
        validate_kind(kind, &voxels)?;
        Ok(VolumeGrid {
            dims,
            spacing,
            kind,
            voxels,
        })
    }

    /// Uniform grid, handy in tests and generators.
    pub fn filled(dims: [usize; 3], spacing: [f64; 3], kind: VoxelKind, value: f64) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        VolumeGrid::new(dims, spacing, kind, vec![value; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn kind(&self) -> VoxelKind {
        self.kind
    }

    pub fn voxels(&self) -> &[f64] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && z < self.dims[2]);
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[self.index(x, y, z)]
    }

    /// Reinterpret the grid as `kind`, revalidating the value invariants.
    pub fn with_kind(mut self, kind: VoxelKind) -> Result<Self> {
        validate_kind(kind, &self.voxels)?;
        self.kind = kind;
        Ok(self)
    }

    /// Same dims/spacing, new values and kind.
    pub(crate) fn map_values(&self, kind: VoxelKind, values: Vec<f64>) -> Result<Self> {
        VolumeGrid::new(self.dims, self.spacing, kind, values)
    }
}

fn validate_kind(kind: VoxelKind, voxels: &[f64]) -> Result<()> {
    match kind {
        VoxelKind::Intensity => Ok(()),
        VoxelKind::BinaryMask => {
            if let Some(i) = voxels.iter().position(|&v| v != 0.0 && v != 1.0) {
                Err(Error::Input(format!(
                    "binary mask voxel {i} is {}, expected 0 or 1",
                    voxels[i]
                )))
            } else {
                Ok(())
            }
        }
        VoxelKind::Probability => {
            if let Some(i) = voxels.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
                Err(Error::Input(format!(
                    "probability voxel {i} is {}, expected in [0, 1]",
                    voxels[i]
                )))
            } else {
                Ok(())
            }
        }
    }
}

/// Inclusive voxel-index box `lo..=hi` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl RoiBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::Bounds(format!("roi lo {lo:?} exceeds hi {hi:?}")));
        }
        Ok(RoiBox { lo, hi })
    }

    pub fn side_lengths(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    pub fn num_voxels(&self) -> usize {
        let s = self.side_lengths();
        s[0] * s[1] * s[2]
    }

    pub fn fits_in(&self, dims: [usize; 3]) -> bool {
        self.hi.iter().zip(&dims).all(|(h, d)| h < d)
    }

    /// Full-volume box for `dims`.
    pub fn full(dims: [usize; 3]) -> Self {
        RoiBox {
            lo: [0, 0, 0],
            hi: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }
}

/// Image modality, which picks the preprocessing pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ct,
    Mr,
    Synthetic,
}

/// One member of the unlabeled pool. The ground-truth mask, when present, is
/// used only by the evaluation harness and for local-ROI construction; the
/// selection strategies themselves never see it.
#[derive(Debug, Clone)]
pub struct PoolSample {
    pub id: String,
    pub image: VolumeGrid,
    pub gt_mask: Option<VolumeGrid>,
    pub modality: Modality,
}

impl PoolSample {
    pub fn new(
        id: impl Into<String>,
        image: VolumeGrid,
        gt_mask: Option<VolumeGrid>,
        modality: Modality,
    ) -> Result<Self> {
        if image.kind() != VoxelKind::Intensity {
            return Err(Error::KindMismatch {
                expected: "intensity",
                actual: image.kind().name(),
            });
        }
        if let Some(mask) = &gt_mask {
            if mask.kind() != VoxelKind::BinaryMask {
                return Err(Error::KindMismatch {
                    expected: "binary-mask",
                    actual: mask.kind().name(),
                });
            }
            if mask.dims() != image.dims() {
                return Err(Error::DimMismatch(format!(
                    "gt mask dims {:?} differ from image dims {:?}",
                    mask.dims(),
                    image.dims()
                )));
            }
        }
        Ok(PoolSample {
            id: id.into(),
            image,
            gt_mask,
            modality,
        })
    }
}

/// Errors if any id occurs twice.
pub fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Input(format!("duplicate sample id: {id}")));
        }
    }
    Ok(())
}

/// Tight bounding box of the mask foreground, expanded by `margin` voxels per
/// direction and clipped to the volume bounds.
pub fn roi_from_mask(mask: &VolumeGrid, margin: usize) -> Result<RoiBox> {
    if mask.kind() != VoxelKind::BinaryMask {
        return Err(Error::KindMismatch {
            expected: "binary-mask",
            actual: mask.kind().name(),
        });
    }
    let dims = mask.dims();
    let mut lo = dims;
    let mut hi = [0usize; 3];
    let mut any = false;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if mask.get(x, y, z) == 1.0 {
                    any = true;
                    let p = [x, y, z];
                    for a in 0..3 {
                        lo[a] = lo[a].min(p[a]);
                        hi[a] = hi[a].max(p[a]);
                    }
                }
            }
        }
    }
    if !any {
        return Err(Error::EmptyForeground);
    }
    for a in 0..3 {
        lo[a] = lo[a].saturating_sub(margin);
        hi[a] = (hi[a] + margin).min(dims[a] - 1);
    }
    RoiBox::new(lo, hi)
}

/// Copy of the sub-grid inside `roi`; spacing and kind are preserved.
pub fn crop(v: &VolumeGrid, roi: &RoiBox) -> Result<VolumeGrid> {
    if !roi.fits_in(v.dims()) {
        return Err(Error::Bounds(format!(
            "roi hi {:?} outside dims {:?}",
            roi.hi,
            v.dims()
        )));
    }
    let side = roi.side_lengths();
    let mut out = Vec::with_capacity(side[0] * side[1] * side[2]);
    for z in roi.lo[2]..=roi.hi[2] {
        for y in roi.lo[1]..=roi.hi[1] {
            for x in roi.lo[0]..=roi.hi[0] {
                out.push(v.get(x, y, z));
            }
        }
    }
    VolumeGrid::new(side, v.spacing(), v.kind(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_seq(dims: [usize; 3]) -> VolumeGrid {
        let n = dims[0] * dims[1] * dims[2];
        let voxels = (0..n).map(|i| i as f64).collect();
        VolumeGrid::new(dims, [1.0, 1.0, 1.0], VoxelKind::Intensity, voxels).unwrap()
    }

    #[test]
    fn new_rejects_length_mismatch() {
        let err = VolumeGrid::new([2, 2, 2], [1.0; 3], VoxelKind::Intensity, vec![0.0; 7]);
        assert!(matches!(err, Err(Error::DimMismatch(_))));
    }

    #[test]
    fn new_rejects_bad_spacing() {
        for s in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            let err = VolumeGrid::new([1, 1, 1], [s, 1.0, 1.0], VoxelKind::Intensity, vec![0.0]);
            assert!(err.is_err(), "spacing {s} accepted");
        }
    }

    #[test]
    fn mask_values_validated() {
        let err = VolumeGrid::new([1, 1, 2], [1.0; 3], VoxelKind::BinaryMask, vec![0.0, 0.5]);
        assert!(err.is_err());
    }

    #[test]
    fn roi_single_voxel_with_margin() {
        let mut voxels = vec![0.0; 32 * 32 * 32];
        voxels[10 + 32 * (10 + 32 * 10)] = 1.0;
        let mask = VolumeGrid::new([32, 32, 32], [1.0; 3], VoxelKind::BinaryMask, voxels).unwrap();
        let roi = roi_from_mask(&mask, 5).unwrap();
        assert_eq!(roi.lo, [5, 5, 5]);
        assert_eq!(roi.hi, [15, 15, 15]);
    }

    #[test]
    fn roi_clips_at_corner() {
        let mut voxels = vec![0.0; 8 * 8 * 8];
        voxels[0] = 1.0;
        let mask = VolumeGrid::new([8, 8, 8], [1.0; 3], VoxelKind::BinaryMask, voxels).unwrap();
        let roi = roi_from_mask(&mask, 5).unwrap();
        assert_eq!(roi.lo, [0, 0, 0]);
        assert_eq!(roi.hi, [5, 5, 5]);
    }

    #[test]
    fn roi_empty_mask_errors() {
        let mask = VolumeGrid::filled([4, 4, 4], [1.0; 3], VoxelKind::BinaryMask, 0.0).unwrap();
        assert!(matches!(roi_from_mask(&mask, 5), Err(Error::EmptyForeground)));
    }

    // Oracle: brute-force min/max scan +- margin over random masks.
    #[test]
    fn roi_matches_bruteforce_scan() {
        let mut rng = crate::rng::SplitMix64::new(11);
        for _ in 0..30 {
            let dims = [
                2 + rng.range(9),
                2 + rng.range(9),
                2 + rng.range(9),
            ];
            let n = dims[0] * dims[1] * dims[2];
            let voxels: Vec<f64> = (0..n)
                .map(|_| if rng.next_f64() < 0.2 { 1.0 } else { 0.0 })
                .collect();
            if !voxels.contains(&1.0) {
                continue;
            }
            let mask =
                VolumeGrid::new(dims, [1.0; 3], VoxelKind::BinaryMask, voxels.clone()).unwrap();
            for margin in [0usize, 2, 5] {
                let roi = roi_from_mask(&mask, margin).unwrap();
                // independent scan
                let mut lo = dims;
                let mut hi = [0usize; 3];
                for z in 0..dims[2] {
                    for y in 0..dims[1] {
                        for x in 0..dims[0] {
                            if voxels[x + dims[0] * (y + dims[1] * z)] == 1.0 {
                                lo = [lo[0].min(x), lo[1].min(y), lo[2].min(z)];
                                hi = [hi[0].max(x), hi[1].max(y), hi[2].max(z)];
                            }
                        }
                    }
                }
                for a in 0..3 {
                    assert_eq!(roi.lo[a], lo[a].saturating_sub(margin));
                    assert_eq!(roi.hi[a], (hi[a] + margin).min(dims[a] - 1));
                }
            }
        }
    }

    #[test]
    fn crop_full_roi_is_identity() {
        let g = grid_seq([3, 4, 5]);
        let out = crop(&g, &RoiBox::full(g.dims())).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn crop_corner_single_voxel() {
        let g = grid_seq([3, 3, 3]);
        let roi = RoiBox::new([0, 0, 0], [0, 0, 0]).unwrap();
        let out = crop(&g, &roi).unwrap();
        assert_eq!(out.dims(), [1, 1, 1]);
        assert_eq!(out.voxels(), &[0.0]);
    }

    #[test]
    fn crop_out_of_range_errors() {
        let g = grid_seq([3, 3, 3]);
        let roi = RoiBox::new([0, 0, 0], [3, 2, 2]).unwrap();
        assert!(matches!(crop(&g, &roi), Err(Error::Bounds(_))));
    }

    // Oracle: random index probes against the offset formula.
    #[test]
    fn crop_indexes_match_offset_probes() {
        let g = grid_seq([7, 6, 5]);
        let roi = RoiBox::new([1, 2, 0], [5, 4, 3]).unwrap();
        let c = crop(&g, &roi).unwrap();
        let mut rng = crate::rng::SplitMix64::new(5);
        let side = roi.side_lengths();
        for _ in 0..100 {
            let x = rng.range(side[0]);
            let y = rng.range(side[1]);
            let z = rng.range(side[2]);
            assert_eq!(
                c.get(x, y, z),
                g.get(x + roi.lo[0], y + roi.lo[1], z + roi.lo[2])
            );
        }
    }

    #[test]
    fn nested_crop_composes() {
        let g = grid_seq([8, 8, 8]);
        let outer = RoiBox::new([1, 1, 1], [6, 6, 6]).unwrap();
        let inner = RoiBox::new([1, 0, 2], [3, 4, 5]).unwrap();
        let twice = crop(&crop(&g, &outer).unwrap(), &inner).unwrap();
        let composed = RoiBox::new(
            [
                outer.lo[0] + inner.lo[0],
                outer.lo[1] + inner.lo[1],
                outer.lo[2] + inner.lo[2],
            ],
            [
                outer.lo[0] + inner.hi[0],
                outer.lo[1] + inner.hi[1],
                outer.lo[2] + inner.hi[2],
            ],
        )
        .unwrap();
        assert_eq!(twice, crop(&g, &composed).unwrap());
    }
}
