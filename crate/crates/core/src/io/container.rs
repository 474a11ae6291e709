//! Minimal little-endian binary containers.
//!
//! Stack (`UQSS`):
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 4         | magic `UQSS`                            |
//! | 4      | 4         | version (u32, = 1)                      |
//! | 8      | 4         | T (u32)                                 |
//! | 12     | 4         | H (u32)                                 |
//! | 16     | 4         | W (u32)                                 |
//! | 20     | 4·T·H·W   | f32 values, sample-major then row-major |
//!
//! Mask (`UQSK`): magic, version, H, W, then H·W bytes each 0 or 1.
//!
//! Input images for augmentation reuse the stack layout with `T = 1` and no
//! range restriction beyond finiteness.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, ProbabilityMap, SampleStack};
use crate::tta::InputImage;

pub const STACK_MAGIC: &[u8; 4] = b"UQSS";
pub const MASK_MAGIC: &[u8; 4] = b"UQSK";
pub const FORMAT_VERSION: u32 = 1;
pub const STACK_HEADER_LEN: usize = 20;
pub const MASK_HEADER_LEN: usize = 16;

/// Values this far outside `[0, 1]` are clamped on read; anything further
/// is an error.
pub const RANGE_TOLERANCE: f64 = 1e-6;

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

fn check_header(bytes: &[u8], magic: &[u8; 4], header_len: usize, what: &'static str) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            what,
            needed: header_len,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != magic {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            what,
            needed: header_len,
            actual: bytes.len(),
        });
    }
    let version = read_u32(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    Ok(())
}

fn payload_len(dims: &[u32], elem: usize) -> Option<usize> {
    dims.iter()
        .try_fold(elem, |acc, &d| acc.checked_mul(d as usize))
}

fn check_payload(bytes: &[u8], header_len: usize, dims: &[u32], elem: usize, what: &'static str) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::Empty("declared dimensions must be positive"));
    }
    let declared = payload_len(dims, elem).ok_or(Error::PayloadLength {
        declared: usize::MAX,
        actual: bytes.len() - header_len,
    })?;
    let actual = bytes.len() - header_len;
    if actual < declared {
        return Err(Error::Truncated {
            what,
            needed: header_len + declared,
            actual: bytes.len(),
        });
    }
    if actual > declared {
        return Err(Error::PayloadLength { declared, actual });
    }
    Ok(())
}

fn to_u32(value: usize) -> u32 {
    u32::try_from(value).expect("dimension exceeds u32")
}

fn encode_planes<'a>(count: usize, height: usize, width: usize, planes: impl Iterator<Item = &'a [f64]>) -> Vec<u8> {
    let mut out = Vec::with_capacity(STACK_HEADER_LEN + 4 * count * height * width);
    out.extend_from_slice(STACK_MAGIC);
    for v in [FORMAT_VERSION, to_u32(count), to_u32(height), to_u32(width)] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for plane in planes {
        for &v in plane {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Header dims `(T, H, W)` and the decoded payload as f64.
fn decode_planes(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    check_header(bytes, STACK_MAGIC, STACK_HEADER_LEN, "stack")?;
    let dims = [read_u32(bytes, 8), read_u32(bytes, 12), read_u32(bytes, 16)];
    check_payload(bytes, STACK_HEADER_LEN, &dims, 4, "stack")?;
    let values = bytes[STACK_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    Ok((dims[0] as usize, dims[1] as usize, dims[2] as usize, values))
}

pub fn encode_stack(stack: &SampleStack) -> Vec<u8> {
    encode_planes(
        stack.sample_count(),
        stack.height(),
        stack.width(),
        stack.samples().iter().map(|s| s.values()),
    )
}

pub fn decode_stack(bytes: &[u8]) -> Result<SampleStack> {
    let (t, h, w, mut values) = decode_planes(bytes)?;
    for (index, v) in values.iter_mut().enumerate() {
        if (0.0..=1.0).contains(v) {
            continue;
        }
        if v.is_finite() && *v >= -RANGE_TOLERANCE && *v <= 1.0 + RANGE_TOLERANCE {
            *v = v.clamp(0.0, 1.0);
        } else {
            return Err(Error::OutOfRange { index, value: *v });
        }
    }
    let plane = h * w;
    let samples = (0..t)
        .map(|k| ProbabilityMap::new(h, w, values[k * plane..(k + 1) * plane].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    SampleStack::new(samples)
}

pub fn write_stack(path: impl AsRef<Path>, stack: &SampleStack) -> Result<()> {
    fs::write(path, encode_stack(stack))?;
    Ok(())
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<SampleStack> {
    decode_stack(&fs::read(path)?)
}

/// A single probability map as a one-sample stack.
pub fn write_map(path: impl AsRef<Path>, map: &ProbabilityMap) -> Result<()> {
    fs::write(path, encode_planes(1, map.height(), map.width(), std::iter::once(map.values())))?;
    Ok(())
}

/// Reads a one-sample stack as a probability map.
pub fn read_map(path: impl AsRef<Path>) -> Result<ProbabilityMap> {
    let stack = read_stack(path)?;
    if stack.sample_count() != 1 {
        return Err(Error::PayloadLength {
            declared: stack.sample_count(),
            actual: 1,
        });
    }
    Ok(stack.into_samples().remove(0))
}

pub fn encode_image(image: &InputImage) -> Vec<u8> {
    encode_planes(1, image.height(), image.width(), std::iter::once(image.values()))
}

pub fn decode_image(bytes: &[u8]) -> Result<InputImage> {
    let (t, h, w, values) = decode_planes(bytes)?;
    if t != 1 {
        return Err(Error::PayloadLength { declared: t, actual: 1 });
    }
    InputImage::new(h, w, values)
}

pub fn write_image(path: impl AsRef<Path>, image: &InputImage) -> Result<()> {
    fs::write(path, encode_image(image))?;
    Ok(())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<InputImage> {
    decode_image(&fs::read(path)?)
}

pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(MASK_HEADER_LEN + mask.values().len());
    out.extend_from_slice(MASK_MAGIC);
    for v in [FORMAT_VERSION, to_u32(mask.height()), to_u32(mask.width())] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(mask.values().iter().map(|&b| u8::from(b)));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    check_header(bytes, MASK_MAGIC, MASK_HEADER_LEN, "mask")?;
    let dims = [read_u32(bytes, 8), read_u32(bytes, 12)];
    check_payload(bytes, MASK_HEADER_LEN, &dims, 1, "mask")?;
    let values = bytes[MASK_HEADER_LEN..]
        .iter()
        .enumerate()
        .map(|(index, &value)| match value {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::NonBinaryMask { index, value }),
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryMask::new(dims[0] as usize, dims[1] as usize, values)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    fs::write(path, encode_mask(mask))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask(&fs::read(path)?)
}
