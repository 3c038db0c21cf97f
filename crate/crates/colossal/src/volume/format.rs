//! The COLOSSAL-VOL container, a minimal text-header + raw-payload volume
//! format pinned bit-exactly so independent implementations agree:
//!
//! ```text
//! COLOSSAL-VOL v1\n
//! dims: X Y Z\n
//! spacing: sx sy sz\n
//! dtype: f32le\n            (or: dtype: u8)
//! \n
//! <raw little-endian payload, x-fastest: index = x + X·y + X·Y·z>
//! ```
//!
//! `u8` payloads are binary masks and every byte must be 0 or 1; `f32le`
//! payloads are intensity fields and every value must be finite. Spacing is
//! written with the shortest decimal representation that round-trips, so
//! reading a file and writing it back reproduces the payload byte for byte.

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{VolumeGrid, VoxelKind};

pub const MAGIC: &str = "COLOSSAL-VOL v1";

const HEADER_LINES: usize = 5;

/// Serialize a grid. Masks are written as `u8`, everything else as `f32le`
/// (which truncates the in-memory `f64` values to `f32` precision).
pub fn render_volume(grid: &VolumeGrid) -> Vec<u8> {
    let dims = grid.dims();
    let spacing = grid.spacing();
    let dtype = match grid.kind() {
        VoxelKind::BinaryMask => "u8",
        _ => "f32le",
    };
    let header = format!(
        "{MAGIC}\ndims: {} {} {}\nspacing: {} {} {}\ndtype: {dtype}\n\n",
        dims[0], dims[1], dims[2], spacing[0], spacing[1], spacing[2]
    );
    let mut out = header.into_bytes();
    match grid.kind() {
        VoxelKind::BinaryMask => out.extend(grid.voxels().iter().map(|&v| v as u8)),
        _ => {
            for &v in grid.voxels() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

/// Parse a COLOSSAL-VOL byte stream. `f32le` files come back as intensity
/// grids (use [`VolumeGrid::with_kind`] to reinterpret), `u8` files as masks.
pub fn parse_volume(bytes: &[u8]) -> Result<VolumeGrid> {
    let mut lines = Vec::with_capacity(HEADER_LINES);
    let mut start = 0;
    for i in 0..bytes.len() {
        if bytes[i] == b'\n' {
            lines.push(&bytes[start..i]);
            start = i + 1;
            if lines.len() == HEADER_LINES {
                break;
            }
        }
    }
    if lines.len() < HEADER_LINES {
        return Err(Error::VolumeFormat {
            line: lines.len() + 1,
            msg: "truncated header".into(),
        });
    }
    let line_str = |idx: usize| -> Result<&str> {
        std::str::from_utf8(lines[idx]).map_err(|_| Error::VolumeFormat {
            line: idx + 1,
            msg: "header line is not valid UTF-8".into(),
        })
    };

    if line_str(0)? != MAGIC {
        return Err(Error::VolumeFormat {
            line: 1,
            msg: format!("expected magic `{MAGIC}`"),
        });
    }

    let dims_line = line_str(1)?;
    let dims = parse_triplet(dims_line, "dims: ", 2, |tok| {
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(format!("invalid dimension `{tok}`")),
        }
    })?;

    let spacing_line = line_str(2)?;
    let spacing = parse_triplet(spacing_line, "spacing: ", 3, |tok| {
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
            _ => Err(format!("invalid spacing `{tok}`")),
        }
    })?;

    let dtype_line = line_str(3)?;
    let dtype = dtype_line
        .strip_prefix("dtype: ")
        .ok_or_else(|| Error::VolumeFormat {
            line: 4,
            msg: "expected `dtype: f32le` or `dtype: u8`".into(),
        })?;
    if !lines[4].is_empty() {
        return Err(Error::VolumeFormat {
            line: 5,
            msg: "expected empty separator line".into(),
        });
    }

    let count = dims[0]
        .checked_mul(dims[1])
        .and_then(|p| p.checked_mul(dims[2]))
        .ok_or_else(|| Error::VolumeFormat {
            line: 2,
            msg: format!("dims overflow: {dims:?}"),
        })?;
    let payload = &bytes[start..];

    let (kind, voxels) = match dtype {
        "f32le" => {
            let expected = count.checked_mul(4).ok_or_else(|| Error::VolumeFormat {
                line: 2,
                msg: format!("dims overflow: {dims:?}"),
            })?;
            if payload.len() != expected {
                return Err(Error::PayloadLength {
                    expected,
                    actual: payload.len(),
                });
            }
            let mut voxels = Vec::with_capacity(count);
            for (i, chunk) in payload.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                if !v.is_finite() {
                    return Err(Error::NonFinitePayload { index: i });
                }
                voxels.push(v as f64);
            }
            (VoxelKind::Intensity, voxels)
        }
        "u8" => {
            if payload.len() != count {
                return Err(Error::PayloadLength {
                    expected: count,
                    actual: payload.len(),
                });
            }
            let mut voxels = Vec::with_capacity(count);
            for (i, &b) in payload.iter().enumerate() {
                if b > 1 {
                    return Err(Error::InvalidMaskValue { index: i, value: b });
                }
                voxels.push(b as f64);
            }
            (VoxelKind::BinaryMask, voxels)
        }
        other => {
            return Err(Error::VolumeFormat {
                line: 4,
                msg: format!("unknown dtype `{other}`"),
            })
        }
    };

    VolumeGrid::new(dims, spacing, kind, voxels)
}

fn parse_triplet<T>(
    line: &str,
    prefix: &str,
    line_no: usize,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<[T; 3]>
where
    T: Copy,
{
    let rest = line.strip_prefix(prefix).ok_or_else(|| Error::VolumeFormat {
        line: line_no,
        msg: format!("expected `{}x y z`", prefix),
    })?;
    let toks: Vec<&str> = rest.split(' ').collect();
    if toks.len() != 3 {
        return Err(Error::VolumeFormat {
            line: line_no,
            msg: format!("expected 3 values, got {}", toks.len()),
        });
    }
    let mut out = Vec::with_capacity(3);
    for tok in toks {
        out.push(parse(tok).map_err(|msg| Error::VolumeFormat { line: line_no, msg })?);
    }
    Ok([out[0], out[1], out[2]])
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<VolumeGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_volume(&bytes)
}

pub fn write_volume(grid: &VolumeGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_volume(grid)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn constant_grid_round_trips() {
        let g = VolumeGrid::filled([2, 2, 2], [1.0; 3], VoxelKind::Intensity, 0.5).unwrap();
        let back = parse_volume(&render_volume(&g)).unwrap();
        assert_eq!(back.dims(), [2, 2, 2]);
        assert!(back.voxels().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn short_payload_is_truncation_error() {
        let g = VolumeGrid::filled([2, 2, 2], [1.0; 3], VoxelKind::Intensity, 0.5).unwrap();
        let mut bytes = render_volume(&g);
        bytes.truncate(bytes.len() - 4); // drop one f32: 7 values remain
        match parse_volume(&bytes) {
            Err(Error::PayloadLength { expected, actual }) => {
                assert_eq!(expected, 32);
                assert_eq!(actual, 28);
            }
            other => panic!("expected PayloadLength, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_names_line_1() {
        let bytes = b"COLOSSAL-VOL v2\ndims: 1 1 1\nspacing: 1 1 1\ndtype: u8\n\n\x00";
        match parse_volume(bytes) {
            Err(Error::VolumeFormat { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_dims_name_line_2() {
        let bytes = b"COLOSSAL-VOL v1\ndims: 0 1 1\nspacing: 1 1 1\ndtype: u8\n\n";
        match parse_volume(bytes) {
            Err(Error::VolumeFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mask_payload_validated() {
        let bytes = b"COLOSSAL-VOL v1\ndims: 2 1 1\nspacing: 1 1 1\ndtype: u8\n\n\x00\x07";
        assert!(matches!(
            parse_volume(bytes),
            Err(Error::InvalidMaskValue { index: 1, value: 7 })
        ));
    }

    #[test]
    fn huge_dims_do_not_overflow() {
        let bytes =
            b"COLOSSAL-VOL v1\ndims: 99999999999 99999999999 99999999999\nspacing: 1 1 1\ndtype: f32le\n\n";
        assert!(parse_volume(bytes).is_err());
    }

    fn random_grid(rng: &mut SplitMix64) -> VolumeGrid {
        let dims = [1 + rng.range(5), 1 + rng.range(5), 1 + rng.range(5)];
        let n = dims[0] * dims[1] * dims[2];
        let spacing = [
            0.25 + rng.next_f64() * 3.0,
            0.25 + rng.next_f64() * 3.0,
            0.25 + rng.next_f64() * 3.0,
        ];
        if rng.range(4) == 0 {
            let voxels = (0..n).map(|_| rng.range(2) as f64).collect();
            VolumeGrid::new(dims, spacing, VoxelKind::BinaryMask, voxels).unwrap()
        } else {
            let voxels = (0..n)
                .map(|_| (rng.next_f64() - 0.5) as f32 as f64 * 2048.0)
                .collect();
            VolumeGrid::new(dims, spacing, VoxelKind::Intensity, voxels).unwrap()
        }
    }

    // Round-trip property: write(read(f)) is byte-identical to f for files
    // produced by the canonical writer, over 50 randomized grids.
    #[test]
    fn write_read_write_is_byte_identical() {
        let mut rng = SplitMix64::new(2024);
        for _ in 0..50 {
            let g = random_grid(&mut rng);
            let bytes = render_volume(&g);
            let back = parse_volume(&bytes).unwrap();
            assert_eq!(render_volume(&back), bytes);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.vol");
        let g = VolumeGrid::filled([3, 2, 1], [1.0, 2.0, 0.5], VoxelKind::Intensity, 0.25).unwrap();
        write_volume(&g, &path).unwrap();
        let back = read_volume(&path).unwrap();
        assert_eq!(back, g);
    }
}
