//! Adaptive average pooling and the pooled-statistics descriptor that stands
//! in for a learned embedding: the volume is partitioned into `g^3` adaptive
//! cells and each cell contributes its mean and standard deviation, giving a
//! deterministic descriptor of dimension `2·g^3`.

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::volume::{crop, RoiBox, VolumeGrid};

/// Output of [`adaptive_avg_pool`], x-fastest like [`VolumeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PooledGrid {
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl PooledGrid {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }
}

/// Bin boundaries for adaptive pooling: cell `i` of `out` covers input
/// indices `[floor(i·len/out), ceil((i+1)·len/out))`. Bins always cover the
/// full axis; for non-divisible sizes adjacent bins may overlap by one index.
#[inline]
fn bin(i: usize, len: usize, out: usize) -> (usize, usize) {
    let lo = i * len / out;
    let hi = ((i + 1) * len).div_ceil(out);
    (lo, hi)
}

/// Mean-pool `grid` down to `out_dims` cells.
pub fn adaptive_avg_pool(grid: &VolumeGrid, out_dims: [usize; 3]) -> Result<PooledGrid> {
    pool_stats(grid, out_dims).map(|(means, _)| PooledGrid {
        dims: out_dims,
        values: means,
    })
}

/// Per-cell mean and population std in one pass over the bins.
fn pool_stats(grid: &VolumeGrid, out_dims: [usize; 3]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dims = grid.dims();
    for a in 0..3 {
        if out_dims[a] == 0 || out_dims[a] > dims[a] {
            return Err(Error::Config(format!(
                "pool dims {out_dims:?} must be between 1 and volume dims {dims:?}"
            )));
        }
    }
    let cells = out_dims[0] * out_dims[1] * out_dims[2];
    let mut means = Vec::with_capacity(cells);
    let mut stds = Vec::with_capacity(cells);
    for k in 0..out_dims[2] {
        let (z0, z1) = bin(k, dims[2], out_dims[2]);
        for j in 0..out_dims[1] {
            let (y0, y1) = bin(j, dims[1], out_dims[1]);
            for i in 0..out_dims[0] {
                let (x0, x1) = bin(i, dims[0], out_dims[0]);
                let mut sum = 0.0;
                let mut count = 0usize;
                for z in z0..z1 {
                    for y in y0..y1 {
                        for x in x0..x1 {
                            sum += grid.get(x, y, z);
                            count += 1;
                        }
                    }
                }
                let mean = sum / count as f64;
                let mut sq = 0.0;
                for z in z0..z1 {
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let d = grid.get(x, y, z) - mean;
                            sq += d * d;
                        }
                    }
                }
                means.push(mean);
                stds.push((sq / count as f64).sqrt());
            }
        }
    }
    Ok((means, stds))
}

/// Pooled-statistics descriptor: `g^3` adaptive cells in x-fastest order,
/// each emitting `(mean, std)`, so `values[2c]` is cell `c`'s mean and
/// `values[2c+1]` its std. The image is expected to be preprocessed to
/// [0, 1]; when `roi` is given the volume is cropped to it first.
pub fn extract_descriptor(
    id: &str,
    image: &VolumeGrid,
    grid_g: usize,
    roi: Option<&RoiBox>,
) -> Result<FeatureVector> {
    let cropped;
    let source = match roi {
        Some(r) => {
            cropped = crop(image, r)?;
            &cropped
        }
        None => image,
    };
    let (means, stds) = pool_stats(source, [grid_g, grid_g, grid_g])?;
    let mut values = Vec::with_capacity(2 * means.len());
    for (m, s) in means.iter().zip(&stds) {
        values.push(*m);
        values.push(*s);
    }
    FeatureVector::new(id, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VoxelKind;

    fn grid(dims: [usize; 3], voxels: Vec<f64>) -> VolumeGrid {
        VolumeGrid::new(dims, [1.0; 3], VoxelKind::Intensity, voxels).unwrap()
    }

    #[test]
    fn constant_grid_pools_to_constant() {
        let g = VolumeGrid::filled([5, 4, 3], [1.0; 3], VoxelKind::Intensity, 0.7).unwrap();
        let p = adaptive_avg_pool(&g, [2, 2, 2]).unwrap();
        assert!(p.values.iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn divisible_case_is_block_average() {
        let n = 64;
        let voxels: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let g = grid([4, 4, 4], voxels);
        let p = adaptive_avg_pool(&g, [2, 2, 2]).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    let mut sum = 0.0;
                    for z in 2 * k..2 * k + 2 {
                        for y in 2 * j..2 * j + 2 {
                            for x in 2 * i..2 * i + 2 {
                                sum += g.get(x, y, z);
                            }
                        }
                    }
                    assert_eq!(p.get(i, j, k), sum / 8.0);
                }
            }
        }
    }

    // Oracle: direct per-bin membership loop with independently computed
    // floor/ceil boundaries.
    #[test]
    fn non_divisible_case_matches_bin_oracle() {
        let n = 125;
        let mut rng = crate::rng::SplitMix64::new(3);
        let voxels: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let g = grid([5, 5, 5], voxels);
        let p = adaptive_avg_pool(&g, [2, 2, 2]).unwrap();
        let edge = |i: usize| -> (usize, usize) {
            let lo = (i as f64 * 5.0 / 2.0).floor() as usize;
            let hi = ((i + 1) as f64 * 5.0 / 2.0).ceil() as usize;
            (lo, hi)
        };
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    let (x0, x1) = edge(i);
                    let (y0, y1) = edge(j);
                    let (z0, z1) = edge(k);
                    let mut sum = 0.0;
                    let mut cnt = 0;
                    for z in z0..z1 {
                        for y in y0..y1 {
                            for x in x0..x1 {
                                sum += g.get(x, y, z);
                                cnt += 1;
                            }
                        }
                    }
                    assert!((p.get(i, j, k) - sum / cnt as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pool_rejects_oversized_output() {
        let g = VolumeGrid::filled([2, 2, 2], [1.0; 3], VoxelKind::Intensity, 0.0).unwrap();
        assert!(adaptive_avg_pool(&g, [3, 2, 2]).is_err());
        assert!(adaptive_avg_pool(&g, [0, 2, 2]).is_err());
    }

    // Exact-partition configurations preserve the global mean; overlapping
    // bins (non-divisible sizes) double-count boundary voxels by design.
    #[test]
    fn divisible_pooling_preserves_global_mean() {
        let mut rng = crate::rng::SplitMix64::new(6);
        let voxels: Vec<f64> = (0..6 * 6 * 6).map(|_| rng.next_f64()).collect();
        let g = grid([6, 6, 6], voxels.clone());
        for out in [[1, 1, 1], [2, 2, 2], [3, 3, 3], [6, 6, 6], [2, 3, 6]] {
            let p = adaptive_avg_pool(&g, out).unwrap();
            let bin_voxels = (6 / out[0]) * (6 / out[1]) * (6 / out[2]);
            let weighted: f64 = p.values.iter().map(|m| m * bin_voxels as f64).sum();
            let mean_out = weighted / voxels.len() as f64;
            let mean_in = voxels.iter().sum::<f64>() / voxels.len() as f64;
            assert!((mean_out - mean_in).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_volume_descriptor() {
        let g = VolumeGrid::filled([8, 8, 8], [1.0; 3], VoxelKind::Intensity, 0.3).unwrap();
        let f = extract_descriptor("s", &g, 2, None).unwrap();
        assert_eq!(f.values.len(), 16);
        for c in 0..8 {
            assert!((f.values[2 * c] - 0.3).abs() < 1e-15);
            // the accumulated mean is off by an ulp, so the std is not a hard 0
            assert!(f.values[2 * c + 1] < 1e-12);
        }
    }

    #[test]
    fn g1_descriptor_is_global_stats() {
        let voxels = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let g = grid([2, 2, 2], voxels);
        let f = extract_descriptor("s", &g, 1, None).unwrap();
        assert_eq!(f.values.len(), 2);
        assert!((f.values[0] - 0.5).abs() < 1e-15);
        assert!((f.values[1] - 0.5).abs() < 1e-15);
    }

    // Flipping the volume along x permutes cells by i -> g-1-i; descriptors
    // must be exactly that permutation of each other.
    #[test]
    fn x_flip_permutes_descriptor() {
        let dims = [8, 8, 8];
        let mut rng = crate::rng::SplitMix64::new(10);
        let voxels: Vec<f64> = (0..512).map(|_| rng.next_f64()).collect();
        let g = grid(dims, voxels.clone());
        let mut flipped = vec![0.0; 512];
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    flipped[(7 - x) + 8 * (y + 8 * z)] = voxels[x + 8 * (y + 8 * z)];
                }
            }
        }
        let gf = grid(dims, flipped);
        let gg = 2usize;
        let a = extract_descriptor("a", &g, gg, None).unwrap();
        let b = extract_descriptor("b", &gf, gg, None).unwrap();
        for k in 0..gg {
            for j in 0..gg {
                for i in 0..gg {
                    let c = i + gg * (j + gg * k);
                    let cf = (gg - 1 - i) + gg * (j + gg * k);
                    // summation order inside a bin differs after the flip
                    assert!((a.values[2 * c] - b.values[2 * cf]).abs() < 1e-12);
                    assert!((a.values[2 * c + 1] - b.values[2 * cf + 1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn descriptor_is_deterministic() {
        let mut rng = crate::rng::SplitMix64::new(12);
        let voxels: Vec<f64> = (0..1000).map(|_| rng.next_f64()).collect();
        let g = grid([10, 10, 10], voxels);
        let a = extract_descriptor("s", &g, 3, None).unwrap();
        let b = extract_descriptor("s", &g, 3, None).unwrap();
        assert_eq!(a, b);
    }
}
