//! Big-endian IDX files (the MNIST distribution format), unsigned-byte only.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Idx(format!("header truncated at byte {at}")))
}

fn payload<'a>(bytes: &'a [u8], magic: u32, header_dims: usize) -> Result<(Vec<usize>, &'a [u8])> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Idx(format!("bad magic {found:#010x}, expected {magic:#010x}")));
    }
    let dims = (0..header_dims)
        .map(|i| read_u32(bytes, 4 + 4 * i).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let body = &bytes[4 + 4 * header_dims..];
    let declared = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Idx("declared size overflows".into()))?;
    if declared != body.len() {
        return Err(Error::Idx(format!(
            "header declares {declared} elements, payload has {}",
            body.len()
        )));
    }
    Ok((dims, body))
}

/// Parses an image file: `count × rows × cols` bytes, scaled to `[0,1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let (dims, body) = payload(bytes, IDX_IMAGES_MAGIC, 3)?;
    let (rows, cols) = (dims[1], dims[2]);
    let d = rows * cols;
    let images = if d == 0 {
        vec![Vec::new(); dims[0]]
    } else {
        body.chunks_exact(d)
            .map(|c| c.iter().map(|&p| f64::from(p) / 255.0).collect())
            .collect()
    };
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    Ok(payload(bytes, IDX_LABELS_MAGIC, 1)?.1.to_vec())
}

/// Reads an IDX image file and, optionally, the matching label file.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: Option<&Path>) -> Result<Dataset> {
    let (_, _, images) = parse_idx_images(&fs::read(images_path)?)?;
    let count = images.len();
    let ds = Dataset::new(images)?;
    match labels_path {
        None => Ok(ds),
        Some(path) => {
            let labels = parse_idx_labels(&fs::read(path)?)?;
            if labels.len() != count {
                return Err(Error::Idx(format!("{count} images but {} labels", labels.len())));
            }
            ds.with_classes(labels)
        }
    }
}

/// Encodes square or rectangular images; features are rounded to the nearest
/// byte after clamping to `[0,1]`.
pub fn encode_idx_images(rows: usize, cols: usize, images: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [images.len(), rows, cols] {
        let v = u32::try_from(v).map_err(|_| Error::Idx("dimension exceeds u32".into()))?;
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: img.len(),
            });
        }
        out.extend(img.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    let n = u32::try_from(labels.len()).map_err(|_| Error::Idx("too many labels".into()))?;
    out.extend_from_slice(&n.to_be_bytes());
    out.extend_from_slice(labels);
    Ok(out)
}

/// Writes `ds` as a `rows × cols` image file, plus its class labels if a path
/// is given and the dataset has them.
pub fn write_idx(
    ds: &Dataset,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: Option<&Path>,
) -> Result<()> {
    fs::write(images_path, encode_idx_images(rows, cols, ds.rows())?)?;
    if let Some(path) = labels_path {
        let classes = ds
            .classes()
            .ok_or_else(|| Error::InvalidArgument("dataset has no class labels".into()))?;
        fs::write(path, encode_idx_labels(classes)?)?;
    }
    Ok(())
}
