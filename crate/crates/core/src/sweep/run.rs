//! Sweep orchestration: sample, size, train and record many networks.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{count_report, max_hidden_dim, BlockSpec};
use crate::data::SequenceDataset;
use crate::error::{config, Result};
use crate::rng::RngStream;
use crate::rnn::train::{min_val_loss, train, TrainConfig};
use crate::sweep::hparams::{sample_hparams, SamplingRanges};
use crate::sweep::record::{Registry, RunRecord, SCHEMA_VERSION};
use crate::tensor::Activation;

/// How the hidden dimension of each run is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Largest hidden dimension whose nominal total stays within the budget.
    Fixed { budget: usize },
    /// Same hidden dimension for every run; totals vary with sparsity.
    Free { hidden_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub task: String,
    pub runs: usize,
    pub first_run_id: u64,
    pub budget: BudgetMode,
    /// Upper limit on the hidden dimension in fixed-budget mode.
    pub max_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub grad_clip_norm: Option<f64>,
    pub ranges: SamplingRanges,
    pub activation: Activation,
    pub master_seed: u64,
    /// Store wall-clock seconds per run. Off by default because timings
    /// differ between executions.
    pub record_timing: bool,
}

impl SweepConfig {
    pub fn new(task: impl Into<String>, runs: usize, budget: BudgetMode, master_seed: u64) -> Self {
        SweepConfig {
            task: task.into(),
            runs,
            first_run_id: 0,
            budget,
            max_hidden: 4096,
            epochs: 25,
            batch_size: 32,
            grad_clip_norm: Some(1.0),
            ranges: SamplingRanges::default(),
            activation: Activation::Tanh,
            master_seed,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return config("a sweep needs at least one run");
        }
        if self.max_hidden == 0 {
            return config("max_hidden must be >= 1");
        }
        match self.budget {
            BudgetMode::Fixed { budget } if budget == 0 => config("budget must be >= 1"),
            BudgetMode::Free { hidden_dim } if hidden_dim == 0 => config("hidden_dim must be >= 1"),
            _ => self.ranges.validate(),
        }
    }
}

/// Seed used for weight instantiation and shuffling of run `run_id`.
pub fn run_seed(master_seed: u64, run_id: u64) -> u64 {
    RngStream::new(master_seed, run_id).split(1).next_u64()
}

/// Samples, sizes and trains one run. `Ok(None)` means the sampled spec
/// was infeasible and the run was skipped (the reason is logged).
pub fn run_one(cfg: &SweepConfig, data: &SequenceDataset, run_id: u64) -> Result<Option<RunRecord>> {
    let start = Instant::now();
    let stream = RngStream::new(cfg.master_seed, run_id);
    let hp = sample_hparams(&mut stream.split(0), &cfg.ranges)?;
    let seed = run_seed(cfg.master_seed, run_id);
    let template = BlockSpec {
        input_dim: data.input_dim,
        hidden_dim: 1,
        output_dim: data.output_dim,
        blocks: hp.blocks,
        activation: cfg.activation,
        learning_rate: hp.learning_rate,
    };
    let hidden_dim = match cfg.budget {
        BudgetMode::Fixed { budget } => match max_hidden_dim(&template, budget) {
            Ok(h) => h.min(cfg.max_hidden),
            Err(e) => {
                log::warn!("run {run_id} skipped: {e}");
                return Ok(None);
            }
        },
        BudgetMode::Free { hidden_dim } => hidden_dim,
    };
    let spec = template.with_hidden_dim(hidden_dim);
    let tcfg = TrainConfig {
        learning_rate: hp.learning_rate,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        grad_clip_norm: cfg.grad_clip_norm,
        seed,
        loss: data.task.loss_kind(),
        ..TrainConfig::default()
    };
    let (ckpt, logs) = train(&spec, data, &tcfg)?;
    let report = count_report(&ckpt.weights);
    let Some(hidden_proportion) = report.hidden_proportion else {
        log::warn!("run {run_id} skipped: no trainable weights in the hidden row");
        return Ok(None);
    };
    let col = |f: fn(&crate::block::BlockConfig) -> f64| -> [f64; 6] { std::array::from_fn(|i| f(&hp.blocks[i])) };
    Ok(Some(RunRecord {
        schema_version: SCHEMA_VERSION,
        run_id,
        task: cfg.task.clone(),
        seed,
        input_dim: spec.input_dim,
        hidden_dim,
        output_dim: spec.output_dim,
        activation: spec.activation,
        means: col(|b| b.mean),
        stds: col(|b| b.std),
        sparsities: col(|b| b.sparsity),
        learning_rate: hp.learning_rate,
        hidden_proportion,
        model_sparsity: report.model_sparsity,
        total_params: report.total,
        val_losses: logs.iter().map(|l| l.val_loss).collect(),
        val_accuracies: logs.iter().map(|l| l.val_accuracy).collect(),
        min_val_loss: min_val_loss(&logs),
        stable: logs.iter().all(|l| l.stable),
        wall_seconds: cfg.record_timing.then(|| start.elapsed().as_secs_f64()),
    }))
}

/// Runs every id in `first_run_id..first_run_id + runs` not already in
/// `registry`, in parallel batches. Records are appended in run-id order
/// after each batch, so an interrupted sweep resumes where it stopped and
/// the registry bytes do not depend on scheduling. Returns the new records.
pub fn run_sweep(cfg: &SweepConfig, data: &SequenceDataset, mut registry: Option<&mut Registry>) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let pending: Vec<u64> = (cfg.first_run_id..cfg.first_run_id + cfg.runs as u64)
        .filter(|id| registry.as_ref().is_none_or(|r| !r.contains(*id)))
        .collect();
    let batch = 2 * rayon::current_num_threads().max(1);
    let mut out = Vec::with_capacity(pending.len());
    for ids in pending.chunks(batch) {
        let results: Vec<Result<Option<RunRecord>>> = ids.par_iter().map(|&id| run_one(cfg, data, id)).collect();
        let mut done = Vec::with_capacity(ids.len());
        for r in results {
            if let Some(rec) = r? {
                done.push(rec);
            }
        }
        if let Some(reg) = registry.as_deref_mut() {
            reg.append(&done)?;
        }
        log::info!("sweep: {} of {} runs done", out.len() + done.len(), pending.len());
        out.extend(done);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::instantiate;
    use crate::data::{rad_lite_generate, split};
    use crate::rnn::train::INIT_STREAM;

    fn tiny() -> SequenceDataset {
        let mut rng = RngStream::new(3, 0);
        split(rad_lite_generate(40, 3, 8, &mut rng).unwrap(), 0.25, &mut rng).unwrap()
    }

    #[test]
    fn records_match_their_specs() {
        let data = tiny();
        let mut cfg = SweepConfig::new("t", 4, BudgetMode::Fixed { budget: 1500 }, 11);
        cfg.epochs = 2;
        let recs = run_sweep(&cfg, &data, None).unwrap();
        assert_eq!(recs.len(), 4);
        for r in &recs {
            r.validate().unwrap();
            assert_eq!(r.val_losses.len(), 2);
            let ws = instantiate(&r.spec(), &RngStream::new(r.seed, INIT_STREAM)).unwrap();
            assert_eq!(count_report(&ws).hidden_proportion, Some(r.hidden_proportion));
            assert!(crate::block::nominal_param_count(&r.spec()).total <= 1500.0);
        }
        assert_eq!(run_sweep(&cfg, &data, None).unwrap(), recs);
    }

    #[test]
    fn infeasible_runs_skipped() {
        let data = tiny();
        let mut cfg = SweepConfig::new("t", 3, BudgetMode::Fixed { budget: 10 }, 1);
        cfg.epochs = 1;
        assert!(run_sweep(&cfg, &data, None).unwrap().is_empty());
    }

    #[test]
    fn resumes_from_registry() {
        let data = tiny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let mut cfg = SweepConfig::new("t", 2, BudgetMode::Free { hidden_dim: 5 }, 2);
        cfg.epochs = 1;
        let mut reg = Registry::open(&path).unwrap();
        run_sweep(&cfg, &data, Some(&mut reg)).unwrap();
        cfg.runs = 3;
        let new = run_sweep(&cfg, &data, Some(&mut reg)).unwrap();
        assert_eq!(new.iter().map(|r| r.run_id).collect::<Vec<_>>(), vec![2]);
        assert!(run_sweep(&cfg, &data, Some(&mut reg)).unwrap().is_empty());
        let ids: Vec<u64> = reg.records().unwrap().iter().map(|r| r.run_id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }
}
