use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax cross-entropy on the final step's output against class indices.
    CrossEntropyFinal,
    /// Mean squared error over every step, output dimension and batch column.
    MseAllSteps,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropyFinal => "cross_entropy_final",
            LossKind::MseAllSteps => "mse_all_steps",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy_final" => Ok(LossKind::CrossEntropyFinal),
            "mse_all_steps" => Ok(LossKind::MseAllSteps),
            other => Err(Error::Config(format!("unknown loss kind '{other}'"))),
        }
    }
}

/// Targets for one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchTargets {
    /// One class index per batch column.
    Classes(Vec<usize>),
    /// One `|y| x n` matrix per step.
    Sequence(Vec<Matrix>),
}

impl BatchTargets {
    pub fn batch_size(&self) -> usize {
        match self {
            BatchTargets::Classes(c) => c.len(),
            BatchTargets::Sequence(s) => s.first().map_or(0, Matrix::cols),
        }
    }
}

/// Loss value and its gradient with respect to every step's output.
pub fn loss_with_grad(outputs: &[Matrix], targets: &BatchTargets, kind: LossKind) -> Result<(f64, Vec<Matrix>)> {
    let Some(last) = outputs.last() else {
        return input("loss needs at least one output step");
    };
    let mut grads: Vec<Matrix> = outputs.iter().map(|o| Matrix::zeros(o.rows(), o.cols())).collect();
    match (kind, targets) {
        (LossKind::CrossEntropyFinal, BatchTargets::Classes(classes)) => {
            let (classes_n, n) = last.shape();
            if classes.len() != n {
                return input(format!("{} class targets for a batch of {n}", classes.len()));
            }
            let g = grads.last_mut().unwrap();
            let mut total = 0.0;
            for (j, &c) in classes.iter().enumerate() {
                if c >= classes_n {
                    return input(format!("class index {c} out of range for {classes_n} outputs"));
                }
                let col = last.column(j);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = col.iter().map(|v| (v - max).exp()).sum();
                let log_z = max + sum.ln();
                total += log_z - col[c];
                for (r, &v) in col.iter().enumerate() {
                    let p = (v - log_z).exp();
                    let onehot = if r == c { 1.0 } else { 0.0 };
                    g.set(r, j, (p - onehot) / n as f64);
                }
            }
            Ok((total / n as f64, grads))
        }
        (LossKind::MseAllSteps, BatchTargets::Sequence(seq)) => {
            if seq.len() != outputs.len() {
                return input(format!("{} target steps for {} output steps", seq.len(), outputs.len()));
            }
            let count = outputs.iter().map(|o| o.rows() * o.cols()).sum::<usize>() as f64;
            let mut total = 0.0;
            for ((o, t), g) in outputs.iter().zip(seq).zip(grads.iter_mut()) {
                if o.shape() != t.shape() {
                    return Err(Error::Shape {
                        op: "mse",
                        left_rows: o.rows(),
                        left_cols: o.cols(),
                        right_rows: t.rows(),
                        right_cols: t.cols(),
                    });
                }
                for ((&a, &b), gv) in o.as_slice().iter().zip(t.as_slice()).zip(g.as_mut_slice()) {
                    let d = a - b;
                    total += d * d;
                    *gv = 2.0 * d / count;
                }
            }
            Ok((total / count, grads))
        }
        (kind, _) => input(format!("targets do not match loss kind {kind}")),
    }
}

pub fn loss(outputs: &[Matrix], targets: &BatchTargets, kind: LossKind) -> Result<f64> {
    loss_with_grad(outputs, targets, kind).map(|(l, _)| l)
}

/// Fraction of columns whose final-step argmax equals the class target.
pub fn accuracy(last: &Matrix, classes: &[usize]) -> f64 {
    let hits = classes
        .iter()
        .enumerate()
        .filter(|&(j, &c)| {
            let col = last.column(j);
            let arg = col
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0;
            arg == c
        })
        .count();
    hits as f64 / classes.len().max(1) as f64
}
