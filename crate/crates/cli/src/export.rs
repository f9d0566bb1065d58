//! CSV exports of a run registry.
//!
//! | kind | columns |
//! |------|---------|
//! | curves | run_id, epoch, val_loss, val_acc, hp_band |
//! | scatter | run_id, block_id, block_sparsity, min_val_loss |
//! | bins | metric, bin_lo, bin_hi, mean_min_loss, n, n_unstable, uc |
//! | pred | run_id, actual_min_loss, predicted_min_loss |
//! | features | run_id, the 20 forest features, min_val_loss, stable |
//!
//! Numbers use Rust's shortest round-trip formatting; missing values are
//! empty fields. Diverged epochs carry the 1e9 loss sentinel.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use brnn_core::sweep::{
    bin_index, bin_summary, feature_names, forest::capped_targets, forest_predict, BinMetric, BinTable, ForestModel,
    RunRecord, BIN_EDGES,
};
use brnn_core::BlockId;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Curves,
    Scatter,
    Bins,
    Pred,
    Features,
}

impl ExportKind {
    pub const ALL: [ExportKind; 5] =
        [ExportKind::Curves, ExportKind::Scatter, ExportKind::Bins, ExportKind::Pred, ExportKind::Features];

    pub fn file_name(self) -> &'static str {
        match self {
            ExportKind::Curves => "curves.csv",
            ExportKind::Scatter => "scatter.csv",
            ExportKind::Bins => "bins.csv",
            ExportKind::Pred => "pred.csv",
            ExportKind::Features => "features.csv",
        }
    }

    pub fn header(self) -> Vec<String> {
        let fixed: &[&str] = match self {
            ExportKind::Curves => &["run_id", "epoch", "val_loss", "val_acc", "hp_band"],
            ExportKind::Scatter => &["run_id", "block_id", "block_sparsity", "min_val_loss"],
            ExportKind::Bins => &["metric", "bin_lo", "bin_hi", "mean_min_loss", "n", "n_unstable", "uc"],
            ExportKind::Pred => &["run_id", "actual_min_loss", "predicted_min_loss"],
            ExportKind::Features => {
                let mut h = vec!["run_id".to_string()];
                h.extend(feature_names());
                h.extend(["min_val_loss".to_string(), "stable".to_string()]);
                return h;
            }
        };
        fixed.iter().map(|s| s.to_string()).collect()
    }
}

impl FromStr for ExportKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "curves" => ExportKind::Curves,
            "scatter" => ExportKind::Scatter,
            "bins" => ExportKind::Bins,
            "predicted-vs-actual" | "pred" => ExportKind::Pred,
            "features" => ExportKind::Features,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown export kind '{other}' (expected curves, scatter, bins, predicted-vs-actual or features)"
                )))
            }
        })
    }
}

/// A fitted forest plus the runs it was not trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub features: Vec<String>,
    pub holdout_fraction: f64,
    pub holdout_seed: u64,
    pub train_ids: Vec<u64>,
    pub held_out_ids: Vec<u64>,
    pub forest: ForestModel,
}

impl MetaModel {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: MetaModel = serde_json::from_str(&text)?;
        if m.features != feature_names() {
            return Err(brnn_core::Error::Format("meta model was fitted on a different feature set".into()).into());
        }
        Ok(m)
    }

    /// Records scored by this model: its held-out runs, or every record when
    /// nothing was held out.
    pub fn scored<'a>(&self, records: &'a [RunRecord]) -> Vec<&'a RunRecord> {
        if self.held_out_ids.is_empty() {
            records.iter().collect()
        } else {
            records.iter().filter(|r| self.held_out_ids.binary_search(&r.run_id).is_ok()).collect()
        }
    }
}

/// Label of the bin holding `v`, e.g. `0.2-0.4`, with the same edge values
/// as the `bin_lo`/`bin_hi` columns of the bins export.
pub fn band_label(v: f64) -> String {
    let b = bin_index(v);
    format!("{}-{}", BIN_EDGES[b], BIN_EDGES[b + 1])
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn writer(path: &Path, kind: ExportKind) -> CliResult<csv::Writer<std::fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(kind.header())?;
    Ok(w)
}

fn finish(mut w: csv::Writer<std::fs::File>) -> CliResult<()> {
    w.flush()?;
    Ok(())
}

pub fn bin_rows(tables: &[BinTable]) -> Vec<[String; 7]> {
    let mut rows = Vec::new();
    for t in tables {
        for b in &t.bins {
            rows.push([
                t.metric.name().to_string(),
                b.lo.to_string(),
                b.hi.to_string(),
                opt(b.mean_min_loss),
                b.n.to_string(),
                b.n_unstable.to_string(),
                b.uc.to_string(),
            ]);
        }
    }
    rows
}

/// Bin tables for `metrics`; none for an empty registry.
pub fn bin_tables(records: &[RunRecord], metrics: &[BinMetric]) -> CliResult<Vec<BinTable>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    Ok(metrics.iter().map(|&m| bin_summary(records, m)).collect::<brnn_core::Result<_>>()?)
}

pub fn write_bins(path: &Path, tables: &[BinTable]) -> CliResult<()> {
    let mut w = writer(path, ExportKind::Bins)?;
    for row in bin_rows(tables) {
        w.write_record(&row)?;
    }
    finish(w)
}

/// Writes one export into `dir` and returns its path. `model` is required
/// for `Pred`.
pub fn export(records: &[RunRecord], kind: ExportKind, model: Option<&MetaModel>, dir: &Path) -> CliResult<PathBuf> {
    if kind == ExportKind::Pred && model.is_none() {
        return Err(CliError::Usage("predicted-vs-actual export needs --model".into()));
    }
    let path = dir.join(kind.file_name());
    match kind {
        ExportKind::Bins => write_bins(&path, &bin_tables(records, &BinMetric::ALL)?)?,
        ExportKind::Curves => {
            let mut w = writer(&path, kind)?;
            for r in records {
                let band = band_label(r.hidden_proportion);
                for (epoch, (loss, acc)) in r.val_losses.iter().zip(&r.val_accuracies).enumerate() {
                    w.write_record([r.run_id.to_string(), epoch.to_string(), loss.to_string(), opt(*acc), band.clone()])?;
                }
            }
            finish(w)?;
        }
        ExportKind::Scatter => {
            let mut w = writer(&path, kind)?;
            for r in records {
                for id in BlockId::ALL {
                    w.write_record([
                        r.run_id.to_string(),
                        id.key().to_string(),
                        r.sparsities[id.index()].to_string(),
                        r.min_val_loss.to_string(),
                    ])?;
                }
            }
            finish(w)?;
        }
        ExportKind::Pred => {
            let m = model.expect("checked above");
            let scored: Vec<RunRecord> = m.scored(records).into_iter().cloned().collect();
            let actual = capped_targets(&m.forest, &scored);
            let mut w = writer(&path, kind)?;
            for (r, a) in scored.iter().zip(actual) {
                let p = forest_predict(&m.forest, &r.features())?;
                w.write_record([r.run_id.to_string(), a.to_string(), p.to_string()])?;
            }
            finish(w)?;
        }
        ExportKind::Features => {
            let mut w = writer(&path, kind)?;
            for r in records {
                let mut row = vec![r.run_id.to_string()];
                row.extend(r.features().iter().map(f64::to_string));
                row.extend([r.min_val_loss.to_string(), r.stable.to_string()]);
                w.write_record(&row)?;
            }
            finish(w)?;
        }
    }
    Ok(path)
}

/// Plain-text rendering of bin tables for the terminal.
pub fn print_bins(out: &mut impl Write, tables: &[BinTable]) -> std::io::Result<()> {
    for t in tables {
        writeln!(out, "{}", t.metric.name())?;
        writeln!(out, "  {:<9} {:>14} {:>5} {:>9}", "bin", "mean_min_loss", "n", "unstable")?;
        for b in &t.bins {
            let mean = match (b.uc, b.mean_min_loss) {
                (true, _) => "uc".to_string(),
                (false, Some(m)) => format!("{m:.4}"),
                (false, None) => "-".to_string(),
            };
            writeln!(out, "  {:<9} {:>14} {:>5} {:>9}", format!("{}-{}", b.lo, b.hi), mean, b.n, b.n_unstable)?;
        }
    }
    Ok(())
}
