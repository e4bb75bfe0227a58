//! Reader for the IDX container used by the MNIST distribution.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::TruncatedFile {
            expected: at + 4,
            found: bytes.len(),
        })
}

fn payload_len(header: usize, dims: &[u32], found: usize) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .and_then(|p| p.checked_add(header))
        .ok_or(Error::TruncatedFile {
            expected: usize::MAX,
            found,
        })
}

/// Parses an IDX image file held in memory. Pixels keep their raw byte values.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Array2<f64>>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let count = be_u32(bytes, 4)?;
    let rows = be_u32(bytes, 8)?;
    let cols = be_u32(bytes, 12)?;
    let expected = payload_len(16, &[count, rows, cols], bytes.len())?;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let size = rows * cols;
    Ok((0..count as usize)
        .map(|k| {
            let start = 16 + k * size;
            Array2::from_shape_fn((rows, cols), |(r, c)| f64::from(bytes[start + r * cols + c]))
        })
        .collect())
}

/// Parses an IDX label file held in memory.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let count = be_u32(bytes, 4)?;
    let expected = payload_len(8, &[count], bytes.len())?;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..expected].to_vec())
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<Vec<Array2<f64>>> {
    parse_idx_images(&std::fs::read(path)?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&std::fs::read(path)?)
}

/// Serializes images (values clamped to `0..=255`) as an IDX image file.
pub fn encode_idx_images(images: &[Array2<f64>]) -> Vec<u8> {
    let (rows, cols) = images.first().map_or((0, 0), |a| a.dim());
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend(img.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
