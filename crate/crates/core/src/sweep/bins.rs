//! Binned summaries of sweep outcomes by hidden proportion or model sparsity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::sweep::record::RunRecord;

pub const BIN_EDGES: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// A bin is marked unconverged when more than this fraction of its runs
/// are unstable.
pub const UC_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMetric {
    HiddenProportion,
    ModelSparsity,
}

impl BinMetric {
    pub const ALL: [BinMetric; 2] = [BinMetric::HiddenProportion, BinMetric::ModelSparsity];

    pub fn name(self) -> &'static str {
        match self {
            BinMetric::HiddenProportion => "hidden_proportion",
            BinMetric::ModelSparsity => "model_sparsity",
        }
    }

    pub fn value(self, r: &RunRecord) -> f64 {
        match self {
            BinMetric::HiddenProportion => r.hidden_proportion,
            BinMetric::ModelSparsity => r.model_sparsity,
        }
    }
}

impl fmt::Display for BinMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BinMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hidden_proportion" | "hp" => Ok(BinMetric::HiddenProportion),
            "model_sparsity" | "sparsity" => Ok(BinMetric::ModelSparsity),
            _ => Err(Error::Config(format!("unknown bin metric {s:?}"))),
        }
    }
}

/// Index into the five bins `[lo, hi)`; the last bin also holds 1.0 and
/// out-of-range values are clamped to the end bins.
pub fn bin_index(v: f64) -> usize {
    BIN_EDGES[1..BIN_EDGES.len() - 1].iter().filter(|&&e| v >= e).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    /// Mean minimum validation loss over stable runs; `None` without any.
    pub mean_min_loss: Option<f64>,
    pub n: usize,
    pub n_unstable: usize,
    pub uc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinTable {
    pub metric: BinMetric,
    pub bins: Vec<Bin>,
}

pub fn bin_summary(records: &[RunRecord], metric: BinMetric) -> Result<BinTable> {
    if records.is_empty() {
        return input("bin summary needs at least one record");
    }
    let k = BIN_EDGES.len() - 1;
    let mut sums = vec![0.0; k];
    let mut stable = vec![0usize; k];
    let mut n = vec![0usize; k];
    for r in records {
        let b = bin_index(metric.value(r));
        n[b] += 1;
        if r.stable {
            stable[b] += 1;
            sums[b] += r.min_val_loss;
        }
    }
    let bins = (0..k)
        .map(|b| {
            let n_unstable = n[b] - stable[b];
            Bin {
                lo: BIN_EDGES[b],
                hi: BIN_EDGES[b + 1],
                mean_min_loss: (stable[b] > 0).then(|| sums[b] / stable[b] as f64),
                n: n[b],
                n_unstable,
                uc: n[b] > 0 && n_unstable as f64 > UC_FRACTION * n[b] as f64,
            }
        })
        .collect();
    Ok(BinTable { metric, bins })
}
