//! Block RNN dynamics, gradients, optimization and training.

pub mod adam;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod train;

use crate::error::Result;
use crate::tensor::Matrix;

pub use adam::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use loss::{loss, loss_with_grad, BatchTargets, LossKind};
pub use lstm::{lstm_hidden_dim, lstm_param_count, Lstm};
pub use model::{BlockRnn, RnnState};
pub use train::{lstm_train, train, train_block_rnn, train_model, EpochLog, TrainConfig, DIVERGED_LOSS};

/// A recurrent model trainable by the shared minibatch loop.
pub trait SequenceModel {
    fn param_len(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]) -> Result<()>;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Output matrix for every step of the sequence.
    fn outputs(&self, seq: &[Matrix]) -> Result<Vec<Matrix>>;
    /// Loss and its gradient in `params()` order.
    fn loss_and_grad(&self, seq: &[Matrix], targets: &BatchTargets, kind: LossKind) -> Result<(f64, Vec<f64>)>;
}
