//! Block-sparse recurrent networks with per-block sparsity, the hidden
//! proportion metric, an a-priori balancing solver, and a sweep plus
//! random-forest pipeline that predicts training outcomes from
//! hyperparameters.

pub mod balance;
pub mod block;
pub mod data;
pub mod error;
pub mod io;
pub mod rng;
pub mod rnn;
pub mod sweep;
pub mod tensor;

pub use balance::{balance, nominal_hidden_proportion, BalanceRequest, BalanceResult};
pub use block::{
    count_report, instantiate, max_hidden_dim, nominal_param_count, preset, BlockConfig, BlockId, BlockSpec,
    CountReport, Dim, MaskedMatrix, NominalCounts, Preset, WeightSpace,
};
pub use data::{SequenceDataset, TaskKind};
pub use error::{Error, Result};
pub use io::Checkpoint;
pub use rng::RngStream;
pub use rnn::{BlockRnn, EpochLog, LossKind, TrainConfig};
pub use tensor::{Activation, Mask, Matrix};
