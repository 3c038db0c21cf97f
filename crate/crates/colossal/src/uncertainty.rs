//! Voxelwise uncertainty from repeated stochastic predictions.
//!
//! A [`PredictionStack`] holds T foreground-probability volumes for one
//! sample. Both measures reduce the stack through the predictive mean
//! `p = mean over runs` per voxel: entropy is the binary entropy of `p`
//! (natural log, so it tops out at ln 2), variance is the population
//! variance of the T probabilities. The overall score of a sample is the
//! mean of the map over all voxels, or over the ROI voxels in local mode.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{parse_volume, render_volume, RoiBox, RoiMode, VolumeGrid, VoxelKind};

/// T stochastic foreground-probability predictions for one sample.
#[derive(Debug, Clone)]
pub struct PredictionStack {
    pub id: String,
    runs: Vec<VolumeGrid>,
    pub roi: Option<RoiBox>,
}

impl PredictionStack {
    pub fn new(id: impl Into<String>, runs: Vec<VolumeGrid>, roi: Option<RoiBox>) -> Result<Self> {
        if runs.len() < 2 {
            return Err(Error::InsufficientRuns { got: runs.len() });
        }
        let dims = runs[0].dims();
        let spacing = runs[0].spacing();
        for (t, run) in runs.iter().enumerate() {
            if run.kind() != VoxelKind::Probability {
                return Err(Error::KindMismatch {
                    expected: "probability",
                    actual: run.kind().name(),
                });
            }
            if run.dims() != dims || run.spacing() != spacing {
                return Err(Error::DimMismatch(format!(
                    "run {t} has dims {:?}, expected {:?}",
                    run.dims(),
                    dims
                )));
            }
        }
        if let Some(r) = &roi {
            if !r.fits_in(dims) {
                return Err(Error::Bounds(format!(
                    "stack roi {:?} outside dims {dims:?}",
                    r.hi
                )));
            }
        }
        Ok(PredictionStack {
            id: id.into(),
            runs,
            roi,
        })
    }

    pub fn runs(&self) -> &[VolumeGrid] {
        &self.runs
    }

    pub fn dims(&self) -> [usize; 3] {
        self.runs[0].dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Entropy,
    Variance,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Entropy => "entropy",
            Measure::Variance => "variance",
        }
    }
}

/// Scalar uncertainty of one sample under one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    pub id: String,
    pub measure: Measure,
    pub score: f64,
    pub roi_mode: RoiMode,
}

/// Binary predictive entropy per voxel, `-p ln p - (1-p) ln(1-p)` with
/// `0 ln 0 := 0`; values lie in `[0, ln 2]` so the grid kind is intensity.
pub fn entropy_map(stack: &PredictionStack) -> VolumeGrid {
    per_voxel_map(stack, |p, _runs, _i| {
        let q = 1.0 - p;
        let mut h = 0.0;
        if p > 0.0 {
            h -= p * p.ln();
        }
        if q > 0.0 {
            h -= q * q.ln();
        }
        h
    })
}

/// Population variance of the T probabilities per voxel.
pub fn variance_map(stack: &PredictionStack) -> VolumeGrid {
    per_voxel_map(stack, |p, runs, i| {
        runs.iter()
            .map(|r| {
                let d = r.voxels()[i] - p;
                d * d
            })
            .sum::<f64>()
            / runs.len() as f64
    })
}

fn per_voxel_map(
    stack: &PredictionStack,
    f: impl Fn(f64, &[VolumeGrid], usize) -> f64,
) -> VolumeGrid {
    let runs = stack.runs();
    let t = runs.len() as f64;
    let n = runs[0].len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mean = runs.iter().map(|r| r.voxels()[i]).sum::<f64>() / t;
        out.push(f(mean, runs, i));
    }
    runs[0]
        .map_values(VoxelKind::Intensity, out)
        .expect("same length as input run")
}

/// Mean of the map over all voxels, or over `roi` only when given.
pub fn aggregate(map: &VolumeGrid, roi: Option<&RoiBox>) -> Result<f64> {
    match roi {
        None => Ok(map.voxels().iter().sum::<f64>() / map.len() as f64),
        Some(r) => {
            if !r.fits_in(map.dims()) {
                return Err(Error::Bounds(format!(
                    "roi hi {:?} outside dims {:?}",
                    r.hi,
                    map.dims()
                )));
            }
            let mut sum = 0.0;
            for z in r.lo[2]..=r.hi[2] {
                for y in r.lo[1]..=r.hi[1] {
                    for x in r.lo[0]..=r.hi[0] {
                        sum += map.get(x, y, z);
                    }
                }
            }
            Ok(sum / r.num_voxels() as f64)
        }
    }
}

/// Read a stack directory of `run_000.vol .. run_{T-1}.vol` probability
/// volumes; the directory name is the sample id.
pub fn read_prediction_stack(dir: impl AsRef<Path>) -> Result<PredictionStack> {
    let dir = dir.as_ref();
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Input(format!("stack path {} has no directory name", dir.display())))?
        .to_string();

    let mut indexed: Vec<(usize, std::path::PathBuf)> = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_prefix("run_").and_then(|s| s.strip_suffix(".vol")) else {
            continue;
        };
        let index: usize = stem.parse().map_err(|_| {
            Error::Input(format!("stack file `{name}` has a non-numeric run index"))
        })?;
        indexed.push((index, entry.path()));
    }
    indexed.sort();
    if indexed.is_empty() {
        return Err(Error::Input(format!(
            "no run_*.vol files in {}",
            dir.display()
        )));
    }
    for (expect, (got, path)) in indexed.iter().enumerate() {
        if *got != expect {
            return Err(Error::Input(format!(
                "stack runs must be contiguous from 0: unexpected index {got} at {}",
                path.display()
            )));
        }
    }

    let mut runs = Vec::with_capacity(indexed.len());
    for (_, path) in &indexed {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let grid = parse_volume(&bytes)?.with_kind(VoxelKind::Probability)?;
        runs.push(grid);
    }
    PredictionStack::new(id, runs, None)
}

/// Write a stack as `dir/run_{t:03}.vol` files.
pub fn write_prediction_stack(stack: &PredictionStack, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, run) in stack.runs().iter().enumerate() {
        let path = dir.join(format!("run_{t:03}.vol"));
        std::fs::write(&path, render_volume(run)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    const LN2: f64 = std::f64::consts::LN_2;

    fn prob_grid(values: Vec<f64>) -> VolumeGrid {
        let n = values.len();
        VolumeGrid::new([n, 1, 1], [1.0; 3], VoxelKind::Probability, values).unwrap()
    }

    fn stack_of(rows: &[Vec<f64>]) -> PredictionStack {
        PredictionStack::new(
            "s",
            rows.iter().map(|r| prob_grid(r.clone())).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn certain_prediction_has_zero_entropy() {
        let s = stack_of(&[vec![1.0], vec![1.0], vec![1.0]]);
        assert_eq!(entropy_map(&s).voxels(), &[0.0]);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn maximal_disagreement_hits_ln2() {
        let s = stack_of(&[vec![0.0], vec![1.0]]);
        let h = entropy_map(&s).voxels()[0];
        assert!((h - LN2).abs() < 1e-15);
        // pins the documented ceiling value
        assert!((LN2 - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn constant_runs_have_zero_variance() {
        let s = stack_of(&[vec![0.4, 0.7], vec![0.4, 0.7]]);
        assert_eq!(variance_map(&s).voxels(), &[0.0, 0.0]);
    }

    #[test]
    fn two_point_variance_is_quarter() {
        let s = stack_of(&[vec![0.0], vec![1.0]]);
        assert_eq!(variance_map(&s).voxels(), &[0.25]);
    }

    #[test]
    fn single_run_is_insufficient() {
        let err = PredictionStack::new("s", vec![prob_grid(vec![0.5])], None);
        assert!(matches!(err, Err(Error::InsufficientRuns { got: 1 })));
    }

    fn random_stack(rng: &mut SplitMix64, t: usize, n: usize) -> PredictionStack {
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..n).map(|_| rng.next_f64()).collect())
            .collect();
        stack_of(&rows)
    }

    // Oracle: direct per-voxel recomputation of both formulas.
    #[test]
    fn maps_match_direct_formulas() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..10 {
            let t = 2 + rng.range(19);
            let n = 1 + rng.range(64);
            let s = random_stack(&mut rng, t, n);
            let ent = entropy_map(&s);
            let var = variance_map(&s);
            for i in 0..n {
                let vals: Vec<f64> = s.runs().iter().map(|r| r.voxels()[i]).collect();
                let p = vals.iter().sum::<f64>() / t as f64;
                let h = if p == 0.0 || p == 1.0 {
                    0.0
                } else {
                    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
                };
                let v = vals.iter().map(|x| (x - p).powi(2)).sum::<f64>() / t as f64;
                assert!((ent.voxels()[i] - h).abs() < 1e-12);
                assert!((var.voxels()[i] - v).abs() < 1e-12);
                assert!(ent.voxels()[i] <= LN2 + 1e-15);
                assert!((0.0..=0.25 + 1e-15).contains(&var.voxels()[i]));
            }
        }
    }

    #[test]
    fn complement_invariance() {
        let mut rng = SplitMix64::new(23);
        let s = random_stack(&mut rng, 7, 40);
        let flipped = PredictionStack::new(
            "s",
            s.runs()
                .iter()
                .map(|r| {
                    prob_grid(r.voxels().iter().map(|p| 1.0 - p).collect())
                })
                .collect(),
            None,
        )
        .unwrap();
        let (ea, eb) = (entropy_map(&s), entropy_map(&flipped));
        let (va, vb) = (variance_map(&s), variance_map(&flipped));
        for i in 0..40 {
            assert!((ea.voxels()[i] - eb.voxels()[i]).abs() < 1e-12);
            assert!((va.voxels()[i] - vb.voxels()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn run_permutation_invariance() {
        let mut rng = SplitMix64::new(29);
        let s = random_stack(&mut rng, 6, 30);
        let mut reversed: Vec<VolumeGrid> = s.runs().to_vec();
        reversed.reverse();
        let r = PredictionStack::new("s", reversed, None).unwrap();
        for (a, b) in entropy_map(&s).voxels().iter().zip(entropy_map(&r).voxels()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in variance_map(&s).voxels().iter().zip(variance_map(&r).voxels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_constant_map() {
        let g = VolumeGrid::filled([4, 4, 4], [1.0; 3], VoxelKind::Intensity, 0.125).unwrap();
        assert_eq!(aggregate(&g, None).unwrap(), 0.125);
    }

    #[test]
    fn aggregate_roi_vs_global_ratio() {
        let dims = [6, 6, 6];
        let roi = RoiBox::new([1, 1, 1], [3, 3, 3]).unwrap();
        let mut voxels = vec![0.0; 216];
        for z in 1..=3 {
            for y in 1..=3 {
                for x in 1..=3 {
                    voxels[x + 6 * (y + 6 * z)] = 0.8;
                }
            }
        }
        let g = VolumeGrid::new(dims, [1.0; 3], VoxelKind::Intensity, voxels).unwrap();
        let local = aggregate(&g, Some(&roi)).unwrap();
        let global = aggregate(&g, None).unwrap();
        assert!((local - 0.8).abs() < 1e-12);
        assert!((global - 0.8 * 27.0 / 216.0).abs() < 1e-12);
    }

    // Oracle: explicit triple loop.
    #[test]
    fn aggregate_matches_loop_oracle() {
        let mut rng = SplitMix64::new(31);
        let dims = [5, 4, 6];
        let voxels: Vec<f64> = (0..120).map(|_| rng.next_f64()).collect();
        let g = VolumeGrid::new(dims, [1.0; 3], VoxelKind::Intensity, voxels.clone()).unwrap();
        let roi = RoiBox::new([1, 0, 2], [4, 2, 5]).unwrap();
        let mut sum = 0.0;
        let mut cnt = 0;
        for z in 2..=5 {
            for y in 0..=2 {
                for x in 1..=4 {
                    sum += voxels[x + 5 * (y + 4 * z)];
                    cnt += 1;
                }
            }
        }
        assert!((aggregate(&g, Some(&roi)).unwrap() - sum / cnt as f64).abs() < 1e-12);
    }

    #[test]
    fn stack_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample_07");
        let mut rng = SplitMix64::new(41);
        // f32-representable probabilities so the file round trip is exact
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..8).map(|_| rng.next_f64() as f32 as f64).collect())
            .collect();
        let s = stack_of(&rows);
        let s = PredictionStack::new("sample_07", s.runs().to_vec(), None).unwrap();
        write_prediction_stack(&s, &path).unwrap();
        let back = read_prediction_stack(&path).unwrap();
        assert_eq!(back.id, "sample_07");
        assert_eq!(back.runs().len(), 3);
        for (a, b) in back.runs().iter().zip(s.runs()) {
            assert_eq!(a.voxels(), b.voxels());
        }
    }

    #[test]
    fn stack_directory_gap_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s");
        std::fs::create_dir_all(&path).unwrap();
        let g = VolumeGrid::filled([2, 1, 1], [1.0; 3], VoxelKind::Probability, 0.5).unwrap();
        std::fs::write(path.join("run_000.vol"), render_volume(&g)).unwrap();
        std::fs::write(path.join("run_002.vol"), render_volume(&g)).unwrap();
        assert!(matches!(
            read_prediction_stack(&path),
            Err(Error::Input(_))
        ));
    }
}
