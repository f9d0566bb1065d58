//! Binary container for [`SequenceDataset`].
//!
//! Layout, little-endian: magic `BRNNDSET`, u32 version, u8 task
//! (0 classification, 1 regression), u64 input_dim, output_dim, seq_len,
//! seed, then the train and validation splits. Each split is a u64 sample
//! count followed by samples: u64 frame count, frames as f64s, then the
//! target as u64 class or `frame count x output_dim` f64s.

use std::path::Path;

use crate::data::{Sample, SequenceDataset, Target, TaskKind};
use crate::error::Result;
use crate::io::{expect_header, ByteReader, ByteWriter};

pub const DATASET_MAGIC: &[u8; 8] = b"BRNNDSET";
pub const DATASET_VERSION: u32 = 1;

pub fn encode_dataset(d: &SequenceDataset) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(DATASET_MAGIC);
    w.u32(DATASET_VERSION);
    w.u8(match d.task {
        TaskKind::Classification => 0,
        TaskKind::Regression => 1,
    });
    for v in [d.input_dim, d.output_dim, d.seq_len] {
        w.len(v);
    }
    w.u64(d.seed);
    for split in [&d.train, &d.validation] {
        w.len(split.len());
        for s in split {
            w.len(s.frames.len());
            for f in &s.frames {
                w.f64s(f);
            }
            match &s.target {
                Target::Class(c) => w.len(*c),
                Target::Sequence(t) => t.iter().for_each(|row| w.f64s(row)),
            }
        }
    }
    w.buf
}

pub fn decode_dataset(bytes: &[u8]) -> Result<SequenceDataset> {
    let mut r = ByteReader::new(bytes);
    expect_header(&mut r, DATASET_MAGIC, DATASET_VERSION, "dataset")?;
    let task = match r.u8()? {
        0 => TaskKind::Classification,
        1 => TaskKind::Regression,
        t => return r.fail(format!("unknown task tag {t}")),
    };
    let (input_dim, output_dim, seq_len) = (r.len(0)?, r.len(0)?, r.len(0)?);
    let seed = r.u64()?;
    let mut splits = Vec::with_capacity(2);
    for _ in 0..2 {
        let n = r.len(8)?;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let frames_n = r.len(8 * input_dim.max(1))?;
            let frames = (0..frames_n).map(|_| r.f64s(input_dim)).collect::<Result<Vec<_>>>()?;
            let target = match task {
                TaskKind::Classification => {
                    let c = r.len(0)?;
                    if c >= output_dim {
                        return r.fail(format!("class {c} outside {output_dim} outputs"));
                    }
                    Target::Class(c)
                }
                TaskKind::Regression => Target::Sequence((0..frames_n).map(|_| r.f64s(output_dim)).collect::<Result<_>>()?),
            };
            samples.push(Sample { frames, target });
        }
        splits.push(samples);
    }
    r.finish()?;
    let validation = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(SequenceDataset { task, input_dim, output_dim, seq_len, seed, train, validation })
}

pub fn write_dataset(d: &SequenceDataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode_dataset(d))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<SequenceDataset> {
    decode_dataset(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{bc_generate, rad_lite_generate, split};
    use crate::rng::RngStream;

    #[test]
    fn round_trips() {
        let mut rng = RngStream::new(4, 0);
        let rad = split(rad_lite_generate(12, 3, 8, &mut rng).unwrap(), 0.25, &mut rng).unwrap();
        let bytes = encode_dataset(&rad);
        assert_eq!(decode_dataset(&bytes).unwrap(), rad);
        let bc = split(bc_generate(1, 3, 2, 6, 4, &mut rng).unwrap(), 0.5, &mut rng).unwrap();
        assert_eq!(decode_dataset(&encode_dataset(&bc)).unwrap(), bc);
        assert!(decode_dataset(&bytes[..bytes.len() - 3]).is_err());
    }
}
