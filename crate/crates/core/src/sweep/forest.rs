//! Random-forest regression of minimum validation loss on run features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};
use crate::rng::RngStream;
use crate::sweep::record::{RunRecord, N_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features tried at each node, rounded up, at least one.
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 1000,
            max_depth: 10,
            min_leaf: 2,
            feature_fraction: 1.0 / 3.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.min_leaf == 0 {
            return config("forest needs trees >= 1 and min_leaf >= 1");
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return config(format!("feature fraction must lie in (0, 1], got {}", self.feature_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a ForestConfig,
    n_try: usize,
    rng: RngStream,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn features(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        let mut f: Vec<usize> = (0..d).collect();
        if self.n_try < d {
            for i in 0..self.n_try {
                let j = i + self.rng.below((d - i) as u64) as usize;
                f.swap(i, j);
            }
            f.truncate(self.n_try);
            f.sort_unstable();
        }
        f
    }

    /// Best split as (feature, threshold, children SSE), lowest SSE first,
    /// earlier feature and position on ties.
    /// Candidates within `tol` of the incumbent count as ties and keep the
    /// earlier one (lower feature, then lower threshold).
    fn best_split(&mut self, idx: &[usize], tol: f64) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let min_leaf = self.cfg.min_leaf;
        let mut best: Option<(usize, f64, f64)> = None;
        for f in self.features() {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (total, total_sq) = order.iter().fold((0.0, 0.0), |(s, q), &i| (s + self.y[i], q + self.y[i] * self.y[i]));
            let (mut s, mut q) = (0.0, 0.0);
            for k in 1..n {
                let yi = self.y[order[k - 1]];
                s += yi;
                q += yi * yi;
                let (a, b) = (self.x[order[k - 1]][f], self.x[order[k]][f]);
                if k < min_leaf || n - k < min_leaf || a >= b {
                    continue;
                }
                let (nl, nr) = (k as f64, (n - k) as f64);
                let sse = (q - s * s / nl) + ((total_sq - q) - (total - s) * (total - s) / nr);
                if best.is_none_or(|(_, _, bs)| sse < bs - tol) {
                    let mid = a + (b - a) / 2.0;
                    best = Some((f, if mid < b { mid } else { a }, sse));
                }
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let value = mean(self.y, &idx);
        self.nodes.push(Node::Leaf { value });
        let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf || pure {
            return id;
        }
        let parent_sse: f64 = idx.iter().map(|&i| (self.y[i] - value).powi(2)).sum();
        let tol = SSE_TOLERANCE * (1.0 + parent_sse);
        let Some((feature, threshold, sse)) = self.best_split(&idx, tol) else {
            return id;
        };
        if !(sse < parent_sse - tol) {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

/// Relative slack below which two split scores are treated as equal.
const SSE_TOLERANCE: f64 = 1e-12;

/// Grows one tree on the rows `idx` (repeats allowed).
pub fn fit_tree(x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, cfg: &ForestConfig, rng: RngStream) -> Tree {
    let d = x[0].len();
    let n_try = ((cfg.feature_fraction * d as f64).ceil() as usize).clamp(1, d);
    let mut b = Builder { x, y, cfg, n_try, rng, nodes: Vec::new() };
    b.build(idx, 0);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub config: ForestConfig,
    /// Cap applied to unstable runs' targets, if any stable run existed.
    pub target_cap: Option<f64>,
    pub n_train: usize,
    pub trees: Vec<Tree>,
}

/// Fits a forest to raw rows. Tree `t` draws its bootstrap sample and
/// feature subsets from stream `t` of the config seed, so the result does
/// not depend on how trees are scheduled.
pub fn forest_fit(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig) -> Result<ForestModel> {
    cfg.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return input(format!("forest needs matching non-empty rows and targets, got {} and {}", x.len(), y.len()));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return input("every row needs the same non-zero feature count");
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return input("features and targets must be finite");
    }
    let n = x.len();
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(cfg.seed, t as u64);
            let idx = if cfg.bootstrap {
                let mut v: Vec<usize> = (0..n).map(|_| rng.below(n as u64) as usize).collect();
                v.sort_unstable();
                v
            } else {
                (0..n).collect()
            };
            fit_tree(x, y, idx, cfg, rng)
        })
        .collect();
    Ok(ForestModel { n_features: d, config: *cfg, target_cap: None, n_train: n, trees })
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Training targets: minimum validation loss, with unstable runs capped at
/// ten times the median stable minimum.
pub fn forest_targets(records: &[RunRecord]) -> (Vec<f64>, Option<f64>) {
    let mut stable: Vec<f64> = records.iter().filter(|r| r.stable).map(|r| r.min_val_loss).collect();
    let cap = median(&mut stable).map(|m| 10.0 * m);
    let y = records
        .iter()
        .map(|r| match (r.stable, cap) {
            (false, Some(c)) => r.min_val_loss.min(c),
            _ => r.min_val_loss,
        })
        .collect();
    (y, cap)
}

pub fn forest_train(records: &[RunRecord], cfg: &ForestConfig) -> Result<ForestModel> {
    if records.len() < 10 {
        return input(format!("forest training needs >= 10 records, got {}", records.len()));
    }
    let x: Vec<Vec<f64>> = records.iter().map(|r| r.features().to_vec()).collect();
    let (y, cap) = forest_targets(records);
    let mut m = forest_fit(&x, &y, cfg)?;
    m.target_cap = cap;
    Ok(m)
}

/// Mean of the tree outputs, summed in tree order.
pub fn forest_predict(model: &ForestModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.n_features {
        return input(format!("expected {} features, got {}", model.n_features, features.len()));
    }
    Ok(model.trees.iter().map(|t| t.predict(features)).sum::<f64>() / model.trees.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    /// `None` when undefined: fewer than three points or a constant side.
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub mae: f64,
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 3 || n != b.len() {
        return None;
    }
    let (ma, mb) = (a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks from 1, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Scores predictions against actual values.
pub fn evaluate_predictions(actual: &[f64], predicted: &[f64]) -> Result<EvalReport> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return input("evaluation needs matching non-empty actual and predicted values");
    }
    let mae = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64;
    Ok(EvalReport {
        n: actual.len(),
        spearman: spearman(actual, predicted),
        pearson: pearson(actual, predicted),
        mae,
    })
}

/// Predicts each held-out record and compares with its (capped) target.
pub fn forest_eval(model: &ForestModel, held_out: &[RunRecord]) -> Result<EvalReport> {
    let actual = capped_targets(model, held_out);
    let predicted = held_out.iter().map(|r| forest_predict(model, &r.features())).collect::<Result<Vec<_>>>()?;
    evaluate_predictions(&actual, &predicted)
}

/// Held-out targets under the cap learned at training time.
pub fn capped_targets(model: &ForestModel, records: &[RunRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| match (r.stable, model.target_cap) {
            (false, Some(c)) => r.min_val_loss.min(c),
            _ => r.min_val_loss,
        })
        .collect()
}

/// Deterministic shuffle of `records` into (train, held_out) with
/// `round(holdout * n)` held out.
pub fn holdout_split(records: &[RunRecord], holdout: f64, seed: u64) -> Result<(Vec<RunRecord>, Vec<RunRecord>)> {
    if !(holdout > 0.0 && holdout < 1.0) {
        return config(format!("holdout fraction must lie in (0, 1), got {holdout}"));
    }
    let mut v = records.to_vec();
    RngStream::new(seed, 0).shuffle(&mut v);
    let k = (holdout * v.len() as f64).round() as usize;
    let held = v.split_off(v.len() - k);
    Ok((v, held))
}

// Keeps the feature count of records and the forest in one place.
const _: () = assert!(N_FEATURES == 20);
