//! Synthetic pool generation: noisy ellipsoidal "organs" on a darker
//! background, optionally with an inner tumor blob of intermediate
//! intensity, plus exact ground-truth masks.
//!
//! A pool can be deliberately multi-modal: sample `i` belongs to mode
//! `i % modes`, and each mode draws its own organ position, radii and
//! intensity levels. Mode parameters come from a fixed-salt generator that
//! does NOT involve the pool seed, so two specs with the same dims, ranges
//! and mode count (for example a training pool and a validation pool with
//! different seeds) share the same modes. The pool seed only drives the
//! per-sample variation: sub-voxel jitter, voxel noise and tumor presence.

use crate::error::{Error, Result};
use crate::rng::{derive, SplitMix64};
use crate::volume::{Modality, PoolSample, VolumeGrid, VoxelKind};

/// Salt for the seed-independent mode parameter stream.
const MODE_SALT: u64 = 0x4D4F_4445;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dims: [usize; 3],
    pub seed: u64,
    /// Organ intensity is drawn per mode from this range.
    pub organ_intensity: (f64, f64),
    /// Background intensity is drawn per mode from this range.
    pub background: (f64, f64),
    pub noise_std: f64,
    pub tumor_prob: f64,
    /// Number of distinct organ modes the pool cycles through.
    pub modes: usize,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Spec(format!("pool size must be >= 2, got {}", self.n)));
        }
        if self.dims.iter().any(|&d| d < 8) {
            return Err(Error::Spec(format!(
                "dims {:?} too small for an ellipsoidal organ; need >= 8 per axis",
                self.dims
            )));
        }
        for (name, (lo, hi)) in [
            ("organ_intensity", self.organ_intensity),
            ("background", self.background),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::Spec(format!(
                    "{name} range ({lo}, {hi}) must satisfy 0 <= lo <= hi <= 1"
                )));
            }
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(Error::Spec(format!(
                "noise std must be finite and >= 0, got {}",
                self.noise_std
            )));
        }
        if !(0.0..=1.0).contains(&self.tumor_prob) {
            return Err(Error::Spec(format!(
                "tumor probability {} outside [0, 1]",
                self.tumor_prob
            )));
        }
        if self.modes == 0 || self.modes > self.n {
            return Err(Error::Spec(format!(
                "mode count {} must be in 1..={}",
                self.modes, self.n
            )));
        }
        Ok(())
    }
}

/// How one sample was generated; used by tests and the run log, never by
/// the selectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleProvenance {
    pub mode: usize,
    pub has_tumor: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticPool {
    pub samples: Vec<PoolSample>,
    pub provenance: Vec<SampleProvenance>,
}

struct ModeParams {
    center_frac: [f64; 3],
    radii_frac: [f64; 3],
    organ: f64,
    background: f64,
}

fn mode_params(spec: &SyntheticSpec, mode: usize) -> ModeParams {
    let mut rng = SplitMix64::new(derive(MODE_SALT, mode as u64));
    let mut center_frac = [0.0; 3];
    let mut radii_frac = [0.0; 3];
    for a in 0..3 {
        center_frac[a] = 0.35 + 0.30 * rng.next_f64();
        radii_frac[a] = 0.14 + 0.12 * rng.next_f64();
    }
    let (olo, ohi) = spec.organ_intensity;
    let (blo, bhi) = spec.background;
    ModeParams {
        center_frac,
        radii_frac,
        organ: olo + (ohi - olo) * rng.next_f64(),
        background: blo + (bhi - blo) * rng.next_f64(),
    }
}

struct Ellipsoid {
    center: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let p = [x as f64, y as f64, z as f64];
        let mut q = 0.0;
        for a in 0..3 {
            let d = (p[a] - self.center[a]) / self.radii[a];
            q += d * d;
        }
        q <= 1.0
    }
}

/// Generate a deterministic synthetic pool; ids are `{prefix}{index:03}`.
pub fn generate_pool(spec: &SyntheticSpec, id_prefix: &str) -> Result<SyntheticPool> {
    spec.validate()?;
    let dims = spec.dims;
    let mut samples = Vec::with_capacity(spec.n);
    let mut provenance = Vec::with_capacity(spec.n);

    for i in 0..spec.n {
        let mode = i % spec.modes;
        let params = mode_params(spec, mode);
        let mut rng = SplitMix64::new(derive(spec.seed, i as u64));

        let mut organ = Ellipsoid {
            center: [0.0; 3],
            radii: [0.0; 3],
        };
        for a in 0..3 {
            let dim = dims[a] as f64;
            organ.radii[a] =
                (params.radii_frac[a] * dim * (1.0 + 0.02 * (2.0 * rng.next_f64() - 1.0))).max(1.5);
            let (lo, hi) = (organ.radii[a], dim - 1.0 - organ.radii[a]);
            if lo > hi {
                return Err(Error::Spec(format!(
                    "ellipsoid infeasible for dims {dims:?} on axis {a}"
                )));
            }
            let raw = params.center_frac[a] * dim + (2.0 * rng.next_f64() - 1.0);
            organ.center[a] = raw.clamp(lo, hi);
        }
        let organ_level = (params.organ + 0.005 * (2.0 * rng.next_f64() - 1.0)).clamp(0.0, 1.0);
        let has_tumor = rng.next_f64() < spec.tumor_prob;
        let tumor = has_tumor.then(|| {
            let mut t = Ellipsoid {
                center: [0.0; 3],
                radii: [0.0; 3],
            };
            for a in 0..3 {
                t.radii[a] = (0.4 * organ.radii[a]).max(1.0);
                let offset = 0.25 * organ.radii[a] * (2.0 * rng.next_f64() - 1.0);
                t.center[a] = organ.center[a] + offset;
            }
            t
        });
        let tumor_level = (organ_level + params.background) / 2.0;

        let count = dims[0] * dims[1] * dims[2];
        let mut voxels = Vec::with_capacity(count);
        let mut mask = Vec::with_capacity(count);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let in_organ = organ.contains(x, y, z);
                    let in_tumor = tumor.as_ref().is_some_and(|t| in_organ && t.contains(x, y, z));
                    let level = if in_tumor {
                        tumor_level
                    } else if in_organ {
                        organ_level
                    } else {
                        params.background
                    };
                    voxels.push((level + spec.noise_std * rng.next_gaussian()).clamp(0.0, 1.0));
                    mask.push(if in_organ { 1.0 } else { 0.0 });
                }
            }
        }
        if !mask.contains(&1.0) {
            return Err(Error::Spec(format!(
                "generated organ for sample {i} is empty; dims {dims:?} too small"
            )));
        }

        let image = VolumeGrid::new(dims, [1.0; 3], VoxelKind::Intensity, voxels)?;
        let gt = VolumeGrid::new(dims, [1.0; 3], VoxelKind::BinaryMask, mask)?;
        samples.push(PoolSample::new(
            format!("{id_prefix}{i:03}"),
            image,
            Some(gt),
            Modality::Synthetic,
        )?);
        provenance.push(SampleProvenance { mode, has_tumor });
    }

    Ok(SyntheticPool {
        samples,
        provenance,
    })
}
