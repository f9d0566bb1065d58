//! IDX binary tensors (the MNIST distribution format).
//!
//! Layout: a big-endian magic (`0x00000803` for a 3-D unsigned-byte tensor,
//! `0x00000801` for a 1-D one), one big-endian `u32` per dimension, then the
//! payload in row-major order.

use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxData {
    Images {
        count: usize,
        rows: usize,
        cols: usize,
        pixels: Vec<u8>,
    },
    Labels(Vec<u8>),
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset,
        message: message.into(),
    })
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => parse_err(bytes.len(), format!("header truncated: need 4 bytes at offset {offset}")),
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = read_u32(bytes, 0)?;
    let ndims = match magic {
        IMAGES_MAGIC => 3,
        LABELS_MAGIC => 1,
        other => return parse_err(0, format!("unsupported magic 0x{other:08x}")),
    };
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(read_u32(bytes, 4 + 4 * d)? as usize);
    }
    let header = 4 + 4 * ndims;
    let Some(len) = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)) else {
        return parse_err(4, format!("dimension product {dims:?} overflows"));
    };
    let payload = &bytes[header..];
    if payload.len() < len {
        return parse_err(
            bytes.len(),
            format!("payload truncated: expected {len} bytes after the header, found {}", payload.len()),
        );
    }
    if payload.len() > len {
        return parse_err(header + len, format!("{} trailing bytes after payload", payload.len() - len));
    }
    Ok(match ndims {
        3 => IdxData::Images {
            count: dims[0],
            rows: dims[1],
            cols: dims[2],
            pixels: payload.to_vec(),
        },
        _ => IdxData::Labels(payload.to_vec()),
    })
}

/// Labeled grayscale images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    /// One row-major `rows x cols` grid per image.
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn from_idx(images: IdxData, labels: IdxData) -> Result<Self> {
        let (IdxData::Images { count, rows, cols, pixels }, IdxData::Labels(labels)) = (images, labels) else {
            return Err(Error::Format("expected an image tensor and a label vector".into()));
        };
        if labels.len() != count {
            return Err(Error::Format(format!("{count} images but {} labels", labels.len())));
        }
        let images = if rows * cols == 0 {
            vec![Vec::new(); count]
        } else {
            pixels.chunks(rows * cols).map(<[u8]>::to_vec).collect()
        };
        Ok(ImageSet { rows, cols, images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Reads `train-images-idx3-ubyte` and `train-labels-idx1-ubyte` from `dir`.
pub fn load_mnist(dir: &Path) -> Result<ImageSet> {
    let images = parse_idx(&std::fs::read(dir.join("train-images-idx3-ubyte"))?)?;
    let labels = parse_idx(&std::fs::read(dir.join("train-labels-idx1-ubyte"))?)?;
    ImageSet::from_idx(images, labels)
}

/// Encodes images as an IDX 3-D tensor.
pub fn encode_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
