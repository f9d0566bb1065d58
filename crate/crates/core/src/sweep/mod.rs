//! Hyperparameter sweeps, binned summaries and the random-forest
//! meta-predictor.

pub mod bins;
pub mod forest;
pub mod hparams;
pub mod record;
pub mod run;

pub use bins::{bin_index, bin_summary, Bin, BinMetric, BinTable, BIN_EDGES};
pub use forest::{
    forest_eval, forest_fit, forest_predict, forest_train, holdout_split, spearman, EvalReport, ForestConfig,
    ForestModel, Tree,
};
pub use hparams::{sample_hparams, HParams, Range, SamplingRanges};
pub use record::{feature_names, read_registry, Registry, RunRecord, N_FEATURES, SCHEMA_VERSION};
pub use run::{run_one, run_seed, run_sweep, BudgetMode, SweepConfig};
