//! Binary checkpoint of a trained block RNN.
//!
//! Layout, little-endian:
//!
//! | field | encoding |
//! |---|---|
//! | magic | `BRNNCKPT` |
//! | version | u32 |
//! | spec | u64 length + spec text (see [`crate::io::specfile`]) |
//! | seed | u64 |
//! | per block, in `BlockId::ALL` order | u64 rows, u64 cols, mask bits row-major packed LSB-first, u64 count, f64 values over mask-true entries row-major |
//! | biases | u64 length + f64s, hidden then output |
//! | optimizer | u8 flag; if 1: u64 step, u64 length, f64 m, f64 v |

use std::path::Path;

use crate::block::{BlockId, MaskedMatrix, WeightSpace};
use crate::block::BlockSpec;
use crate::error::{Error, Result};
use crate::io::specfile::{parse_spec, write_spec};
use crate::io::{expect_header, ByteReader, ByteWriter};
use crate::rnn::adam::AdamState;
use crate::tensor::{Mask, Matrix};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"BRNNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: BlockSpec,
    pub weights: WeightSpace,
    pub adam: Option<AdamState>,
    /// Training seed.
    pub seed: u64,
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        let spec = write_spec(&self.spec);
        w.len(spec.len());
        w.bytes(spec.as_bytes());
        w.u64(self.seed);
        for block in &self.weights.blocks {
            let (r, c) = block.shape();
            w.len(r);
            w.len(c);
            w.bytes(&pack_bits(block.mask().bits()));
            w.len(block.trainable_count());
            let vals: Vec<f64> = (0..block.trainable_count()).map(|k| block.active_value(k)).collect();
            w.f64s(&vals);
        }
        for bias in [&self.weights.bias_h, &self.weights.bias_y] {
            w.len(bias.len());
            w.f64s(bias);
        }
        match &self.adam {
            None => w.u8(0),
            Some(a) => {
                w.u8(1);
                w.u64(a.step);
                w.len(a.m.len());
                w.f64s(&a.m);
                w.f64s(&a.v);
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        expect_header(&mut r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, "checkpoint")?;
        let n = r.len(1)?;
        let at = r.offset();
        let text = std::str::from_utf8(r.take(n)?).map_err(|_| Error::Parse { offset: at, message: "spec text is not UTF-8".into() })?;
        let spec = parse_spec(text)?;
        let seed = r.u64()?;
        let mut blocks = Vec::with_capacity(6);
        for id in BlockId::ALL {
            let (er, ec) = spec.block_shape(id);
            let (rows, cols) = (r.len(0)?, r.len(0)?);
            if (rows, cols) != (er, ec) {
                return r.fail(format!("block {id} is {rows}x{cols}, spec says {er}x{ec}"));
            }
            let packed = r.take((rows * cols).div_ceil(8))?;
            let bits: Vec<bool> = (0..rows * cols).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
            let mask = Mask::from_bits(rows, cols, bits)?;
            let count = r.len(8)?;
            if count != mask.count_true() {
                return r.fail(format!("block {id} stores {count} values for {} mask-true entries", mask.count_true()));
            }
            let vals = r.f64s(count)?;
            let mut m = MaskedMatrix::new(Matrix::zeros(rows, cols), mask)?;
            for (k, v) in vals.into_iter().enumerate() {
                m.set_active_value(k, v);
            }
            blocks.push(m);
        }
        let mut biases = Vec::with_capacity(2);
        for expected in [spec.hidden_dim, spec.output_dim] {
            let n = r.len(8)?;
            if n != expected {
                return r.fail(format!("bias of length {n}, expected {expected}"));
            }
            biases.push(r.f64s(n)?);
        }
        let adam = match r.u8()? {
            0 => None,
            1 => {
                let step = r.u64()?;
                let n = r.len(16)?;
                let (m, v) = (r.f64s(n)?, r.f64s(n)?);
                Some(AdamState { step, m, v })
            }
            f => return r.fail(format!("bad optimizer flag {f}")),
        };
        r.finish()?;
        let bias_y = biases.pop().unwrap();
        let bias_h = biases.pop().unwrap();
        let blocks: [MaskedMatrix; 6] = blocks.try_into().expect("six blocks");
        Ok(Checkpoint { spec, weights: WeightSpace { blocks, bias_h, bias_y }, adam, seed })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::instantiate;
    use crate::rng::RngStream;

    fn sample() -> Checkpoint {
        let mut spec = BlockSpec::uniform(5, 7, 3, 0.4);
        spec.block_mut(BlockId::Hh).sparsity = 1.0;
        spec.block_mut(BlockId::Yy).sparsity = 0.0;
        let mut weights = instantiate(&spec, &RngStream::new(3, 0)).unwrap();
        weights.bias_h[2] = -0.25;
        let n = weights.trainable_len();
        let adam = AdamState { step: 4, m: vec![0.5; n], v: vec![1e-9; n] };
        Checkpoint { spec, weights, adam: Some(adam), seed: 99 }
    }

    #[test]
    fn byte_identical_round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        let bare = Checkpoint { adam: None, ..c };
        assert_eq!(Checkpoint::from_bytes(&bare.to_bytes()).unwrap(), bare);
    }

    #[test]
    fn refuses_other_versions() {
        let mut bytes = sample().to_bytes();
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        let err = Checkpoint::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&magic).is_err());
    }
}
