//! On-disk formats: spec text files, binary checkpoints and dataset
//! containers. Binary formats are little-endian.

pub mod checkpoint;
pub mod container;
pub mod specfile;

use crate::error::{Error, Result};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use container::{decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_VERSION};
pub use specfile::{parse_spec, write_spec, SPEC_FORMAT};

/// Append-only little-endian byte sink.
#[derive(Debug, Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.bytes(&v.to_le_bytes());
        }
    }
}

/// Cursor over a byte slice that reports failures by offset.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.pos, message: message.into() })
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(Error::Parse {
                offset: self.bytes.len(),
                message: format!("truncated: needed {n} bytes at offset {}", self.pos),
            }),
        }
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A length field, refused if it cannot fit in the remaining bytes
    /// at `unit` bytes per element.
    pub fn len(&mut self, unit: usize) -> Result<usize> {
        let at = self.pos;
        let v = self.u64()?;
        let remaining = (self.bytes.len() - self.pos) as u64;
        if unit > 0 && v > remaining / unit as u64 {
            return Err(Error::Parse { offset: at, message: format!("length {v} exceeds the remaining {remaining} bytes") });
        }
        Ok(v as usize)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Parse { offset: self.pos, message: "length overflow".into() })?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos));
        }
        Ok(())
    }
}

/// Checks a magic tag and a version word.
pub(crate) fn expect_header(r: &mut ByteReader<'_>, magic: &[u8; 8], version: u32, what: &str) -> Result<()> {
    if r.take(8)? != magic {
        return Err(Error::Parse { offset: 0, message: format!("not a {what} file (bad magic)") });
    }
    let v = r.u32()?;
    if v != version {
        return Err(Error::Format(format!("{what} format version {v} is not supported (expected {version})")));
    }
    Ok(())
}
