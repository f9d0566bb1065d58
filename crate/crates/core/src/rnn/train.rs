//! Minibatch training with per-epoch validation.

use serde::{Deserialize, Serialize};

use crate::block::BlockSpec;
use crate::data::SequenceDataset;
use crate::error::{config, input, Error, Result};
use crate::io::checkpoint::Checkpoint;
use crate::rng::RngStream;
use crate::rnn::adam::{AdamConfig, AdamState};
use crate::rnn::loss::{accuracy, loss, BatchTargets, LossKind};
use crate::rnn::lstm::{lstm_hidden_dim, Lstm};
use crate::rnn::model::BlockRnn;
use crate::rnn::SequenceModel;

/// Loss recorded for epochs at or after a divergence.
pub const DIVERGED_LOSS: f64 = 1e9;

/// Stream ids under the training seed.
pub const INIT_STREAM: u64 = 0;
pub const SHUFFLE_STREAM: u64 = 1;

const VALIDATION_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
    pub loss: LossKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 25,
            grad_clip_norm: Some(1.0),
            seed: 0,
            loss: LossKind::CrossEntropyFinal,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return config(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return config("batch size and epochs must be >= 1");
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0) {
                return config(format!("clip norm must be > 0, got {c}"));
            }
        }
        for b in [self.beta1, self.beta2] {
            if !(b > 0.0 && b < 1.0) {
                return config(format!("adam betas must lie in (0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0) {
            return config("adam eps must be > 0");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            clip_norm: self.grad_clip_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: Option<f64>,
    pub stable: bool,
}

impl EpochLog {
    fn diverged(epoch: usize) -> Self {
        EpochLog {
            epoch,
            train_loss: DIVERGED_LOSS,
            val_loss: DIVERGED_LOSS,
            val_accuracy: None,
            stable: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub logs: Vec<EpochLog>,
    pub adam: AdamState,
    pub diverged: bool,
}

/// Mean loss and accuracy (classification only) over the validation split.
pub fn evaluate<M: SequenceModel>(model: &M, data: &SequenceDataset, kind: LossKind) -> Result<(f64, Option<f64>)> {
    let n = data.validation.len();
    let mut total = 0.0;
    let mut hits = 0.0;
    for chunk in data.validation.chunks(VALIDATION_CHUNK) {
        let refs: Vec<_> = chunk.iter().collect();
        let (seq, targets) = data.batch(&refs)?;
        let outputs = model.outputs(&seq)?;
        total += loss(&outputs, &targets, kind)? * chunk.len() as f64;
        if let BatchTargets::Classes(c) = &targets {
            hits += accuracy(outputs.last().unwrap(), c) * chunk.len() as f64;
        }
    }
    let acc = data.task.is_classification().then(|| hits / n as f64);
    Ok((total / n as f64, acc))
}

/// Trains `model` in place. A run that produces a non-finite loss stops
/// updating; that epoch and all later ones are logged with the sentinel.
pub fn train_model<M: SequenceModel>(model: &mut M, data: &SequenceDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() || data.validation.is_empty() {
        return input("training needs non-empty train and validation splits");
    }
    if data.task.loss_kind() != cfg.loss {
        return config(format!("loss {} does not fit task {}", cfg.loss, data.task.name()));
    }
    if model.input_dim() != data.input_dim || model.output_dim() != data.output_dim {
        return config(format!(
            "model is {}->{} but dataset is {}->{}",
            model.input_dim(),
            model.output_dim(),
            data.input_dim,
            data.output_dim
        ));
    }
    let adam_cfg = cfg.adam();
    let mut adam = AdamState::new(model.param_len());
    let mut shuffler = RngStream::new(cfg.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut diverged = false;

    for epoch in 0..cfg.epochs {
        if diverged {
            logs.push(EpochLog::diverged(epoch));
            continue;
        }
        shuffler.shuffle(&mut order);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let refs: Vec<_> = idx.iter().map(|&i| &data.train[i]).collect();
            let (seq, targets) = data.batch(&refs)?;
            let (l, mut g) = match model.loss_and_grad(&seq, &targets, cfg.loss) {
                Ok(v) => v,
                Err(Error::Diverged(_)) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let mut p = model.params();
            adam.update(&mut p, &mut g, &adam_cfg)?;
            if p.iter().any(|v| !v.is_finite()) {
                diverged = true;
                break;
            }
            model.set_params(&p)?;
            sum += l;
            batches += 1;
        }
        if diverged {
            logs.push(EpochLog::diverged(epoch));
            continue;
        }
        let (val_loss, val_accuracy) = evaluate(model, data, cfg.loss)?;
        if !val_loss.is_finite() || val_loss >= DIVERGED_LOSS {
            diverged = true;
            logs.push(EpochLog::diverged(epoch));
            continue;
        }
        logs.push(EpochLog {
            epoch,
            train_loss: sum / batches as f64,
            val_loss,
            val_accuracy,
            stable: true,
        });
    }
    Ok(TrainOutcome { logs, adam, diverged })
}

/// Instantiates `spec` from the config seed and trains it.
pub fn train(spec: &BlockSpec, data: &SequenceDataset, cfg: &TrainConfig) -> Result<(Checkpoint, Vec<EpochLog>)> {
    let model = BlockRnn::from_spec(spec, &RngStream::new(cfg.seed, INIT_STREAM))?;
    train_block_rnn(model, data, cfg)
}

/// Trains an already instantiated block RNN.
pub fn train_block_rnn(mut model: BlockRnn, data: &SequenceDataset, cfg: &TrainConfig) -> Result<(Checkpoint, Vec<EpochLog>)> {
    let outcome = train_model(&mut model, data, cfg)?;
    let ckpt = Checkpoint {
        spec: model.spec,
        weights: model.weights,
        adam: Some(outcome.adam),
        seed: cfg.seed,
    };
    Ok((ckpt, outcome.logs))
}

/// LSTM baseline sized to the largest hidden size within `budget`.
pub fn lstm_train(budget: usize, data: &SequenceDataset, cfg: &TrainConfig) -> Result<(Lstm, Vec<EpochLog>)> {
    let h = lstm_hidden_dim(budget, data.input_dim, data.output_dim)?;
    let mut model = Lstm::new(data.input_dim, h, data.output_dim, &RngStream::new(cfg.seed, INIT_STREAM))?;
    let outcome = train_model(&mut model, data, cfg)?;
    Ok((model, outcome.logs))
}

/// Highest validation accuracy over the logged epochs.
pub fn best_accuracy(logs: &[EpochLog]) -> Option<f64> {
    logs.iter().filter_map(|l| l.val_accuracy).fold(None, |m, a| Some(m.map_or(a, |m: f64| m.max(a))))
}

/// Lowest validation loss over the logged epochs.
pub fn min_val_loss(logs: &[EpochLog]) -> f64 {
    logs.iter().map(|l| l.val_loss).fold(f64::INFINITY, f64::min)
}
