//! Sweep run records and the JSON-lines run registry.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::block::{BlockConfig, BlockId, BlockSpec};
use crate::error::{Error, Result};
use crate::rnn::train::DIVERGED_LOSS;
use crate::tensor::Activation;

pub const SCHEMA_VERSION: u32 = 1;
pub const N_FEATURES: usize = 20;

/// Feature names in [`RunRecord::features`] order.
pub fn feature_names() -> Vec<String> {
    let mut v = Vec::with_capacity(N_FEATURES);
    for field in ["mean", "std", "sparsity"] {
        for id in BlockId::ALL {
            v.push(format!("{}_{field}", id.key()));
        }
    }
    v.push("learning_rate".into());
    v.push("hidden_proportion".into());
    v
}

/// One trained network of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: u64,
    pub task: String,
    /// Seed of weight instantiation and batch shuffling.
    pub seed: u64,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub means: [f64; 6],
    pub stds: [f64; 6],
    pub sparsities: [f64; 6],
    pub learning_rate: f64,
    /// Realized, from the instantiated masks.
    pub hidden_proportion: f64,
    pub model_sparsity: f64,
    pub total_params: usize,
    pub val_losses: Vec<f64>,
    pub val_accuracies: Vec<Option<f64>>,
    pub min_val_loss: f64,
    pub stable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl RunRecord {
    /// 6 means, 6 stds, 6 sparsities, learning rate, hidden proportion.
    pub fn features(&self) -> [f64; N_FEATURES] {
        let mut f = [0.0; N_FEATURES];
        f[..6].copy_from_slice(&self.means);
        f[6..12].copy_from_slice(&self.stds);
        f[12..18].copy_from_slice(&self.sparsities);
        f[18] = self.learning_rate;
        f[19] = self.hidden_proportion;
        f
    }

    pub fn spec(&self) -> BlockSpec {
        let blocks = std::array::from_fn(|i| BlockConfig::new(self.means[i], self.stds[i], self.sparsities[i]));
        BlockSpec {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            output_dim: self.output_dim,
            blocks,
            activation: self.activation,
            learning_rate: self.learning_rate,
        }
    }

    /// Checks the record's internal consistency.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Format(format!("run {}: {m}", self.run_id)));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!("schema version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.val_losses.is_empty() || self.val_losses.len() != self.val_accuracies.len() {
            return fail("loss and accuracy traces must be non-empty and of equal length".into());
        }
        let min = self.val_losses.iter().copied().fold(f64::INFINITY, f64::min);
        if min.to_bits() != self.min_val_loss.to_bits() {
            return fail(format!("min_val_loss {} is not the minimum {min}", self.min_val_loss));
        }
        let has_sentinel = self.val_losses.iter().any(|&l| l >= DIVERGED_LOSS);
        if self.stable == has_sentinel {
            return fail("stable flag disagrees with the loss trace".into());
        }
        Ok(())
    }
}

/// Append-only JSON-lines file of run records keyed by `run_id`.
#[derive(Debug)]
pub struct Registry {
    path: PathBuf,
    ids: BTreeSet<u64>,
}

impl Registry {
    /// Opens (creating if absent) a registry and indexes its run ids.
    pub fn open(path: &Path) -> Result<Self> {
        let records = if path.exists() { read_registry(path)? } else { Vec::new() };
        if !path.exists() {
            File::create(path)?;
        }
        Ok(Registry {
            path: path.to_path_buf(),
            ids: records.iter().map(|r| r.run_id).collect(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, run_id: u64) -> bool {
        self.ids.contains(&run_id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Appends records whose ids are new; returns how many were written.
    pub fn append(&mut self, records: &[RunRecord]) -> Result<usize> {
        let mut out = OpenOptions::new().append(true).open(&self.path)?;
        let mut written = 0;
        for r in records {
            if self.ids.insert(r.run_id) {
                let mut line = serde_json::to_string(r)?;
                line.push('\n');
                out.write_all(line.as_bytes())?;
                written += 1;
            }
        }
        out.flush()?;
        Ok(written)
    }

    pub fn records(&self) -> Result<Vec<RunRecord>> {
        read_registry(&self.path)
    }
}

/// Reads every record, rejecting unknown schema versions.
pub fn read_registry(path: &Path) -> Result<Vec<RunRecord>> {
    let file = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}
