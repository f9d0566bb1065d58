//! Sequence datasets: IDX ingestion, anomaly-detection sequences and a
//! behavioral-cloning stand-in.

pub mod bc;
pub mod idx;
pub mod rad;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::rng::RngStream;
use crate::rnn::{BatchTargets, LossKind};
use crate::tensor::Matrix;

pub use bc::{bc_generate, Teacher};
pub use idx::{load_mnist, parse_idx, IdxData, ImageSet};
pub use rad::{rad_generate, rad_lite_generate, rad_lite_sequences, rad_sequences, Combo, RadSequence, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    /// Predict a class from the final step.
    Classification,
    /// Regress a target vector at every step.
    Regression,
}

impl TaskKind {
    pub fn is_classification(self) -> bool {
        self == TaskKind::Classification
    }

    pub fn loss_kind(self) -> LossKind {
        match self {
            TaskKind::Classification => LossKind::CrossEntropyFinal,
            TaskKind::Regression => LossKind::MseAllSteps,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    /// One target vector per step.
    Sequence(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// One flattened input vector per step.
    pub frames: Vec<Vec<f64>>,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub task: TaskKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub seq_len: usize,
    pub seed: u64,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacks samples column-wise into one `|x| x n` matrix per step.
    pub fn batch(&self, samples: &[&Sample]) -> Result<(Vec<Matrix>, BatchTargets)> {
        let n = samples.len();
        if n == 0 {
            return input("empty batch");
        }
        let steps = samples[0].frames.len();
        let mut seq = vec![Matrix::zeros(self.input_dim, n); steps];
        for (j, s) in samples.iter().enumerate() {
            if s.frames.len() != steps {
                return input(format!("ragged batch: {} vs {steps} steps", s.frames.len()));
            }
            for (m, frame) in seq.iter_mut().zip(&s.frames) {
                if frame.len() != self.input_dim {
                    return input(format!("frame has {} values, expected {}", frame.len(), self.input_dim));
                }
                for (k, &v) in frame.iter().enumerate() {
                    m.set(k, j, v);
                }
            }
        }
        let targets = match self.task {
            TaskKind::Classification => BatchTargets::Classes(
                samples
                    .iter()
                    .map(|s| match &s.target {
                        Target::Class(c) => Ok(*c),
                        Target::Sequence(_) => input("sequence target in a classification dataset"),
                    })
                    .collect::<Result<_>>()?,
            ),
            TaskKind::Regression => {
                let mut out = vec![Matrix::zeros(self.output_dim, n); steps];
                for (j, s) in samples.iter().enumerate() {
                    let Target::Sequence(ts) = &s.target else {
                        return input("class target in a regression dataset");
                    };
                    if ts.len() != steps {
                        return input("target length differs from input length");
                    }
                    for (m, t) in out.iter_mut().zip(ts) {
                        if t.len() != self.output_dim {
                            return input("target vector has the wrong width");
                        }
                        for (k, &v) in t.iter().enumerate() {
                            m.set(k, j, v);
                        }
                    }
                }
                BatchTargets::Sequence(out)
            }
        };
        Ok((seq, targets))
    }
}

/// Pools both splits, shuffles them with `rng` and moves
/// `round(fraction · total)` samples into validation.
pub fn split(dataset: SequenceDataset, validation_fraction: f64, rng: &mut RngStream) -> Result<SequenceDataset> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::Input(format!("validation fraction must lie in (0, 1), got {validation_fraction}")));
    }
    let SequenceDataset {
        task,
        input_dim,
        output_dim,
        seq_len,
        seed,
        mut train,
        validation,
    } = dataset;
    train.extend(validation);
    let total = train.len();
    let n_val = (validation_fraction * total as f64).round() as usize;
    if n_val == 0 || n_val >= total {
        return input(format!("fraction {validation_fraction} of {total} samples leaves an empty split"));
    }
    rng.shuffle(&mut train);
    let validation = train.split_off(total - n_val);
    Ok(SequenceDataset {
        task,
        input_dim,
        output_dim,
        seq_len,
        seed,
        train,
        validation,
    })
}
