//! A-priori network specification from task dimensions alone.
//!
//! Every block stays dense except one off-centre block of the hidden row:
//! `Hx` when the input is at least as wide as the output, `Hy` otherwise.
//! The solver searches that block's sparsity over a grid jointly with the
//! hidden dimension, keeping the nominal parameter total within budget and
//! driving the nominal hidden proportion toward a target.

use serde::{Deserialize, Serialize};

use crate::block::{fan_in_init, max_hidden_dim, nominal_param_count, BlockId, BlockSpec};
use crate::error::{config, Result};

/// Two hidden proportions closer than this are treated as equal.
pub const HP_TIE_EPS: f64 = 1e-12;
/// Two nominal totals closer than this are treated as equal.
pub const TOTAL_TIE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRequest {
    pub input_dim: usize,
    pub output_dim: usize,
    pub budget: usize,
    pub target_hp: f64,
    pub step: f64,
    pub max_hidden: usize,
}

impl BalanceRequest {
    pub fn new(input_dim: usize, output_dim: usize, budget: usize) -> Self {
        BalanceRequest {
            input_dim,
            output_dim,
            budget,
            target_hp: 0.5,
            step: 0.01,
            max_hidden: 4096,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return config("input and output dimensions must be >= 1");
        }
        if !(self.target_hp > 0.0 && self.target_hp < 1.0) {
            return config(format!("target hidden proportion must lie in (0, 1), got {}", self.target_hp));
        }
        if !(self.step > 0.0 && self.step <= 0.5) {
            return config(format!("sparsity step must lie in (0, 0.5], got {}", self.step));
        }
        if self.max_hidden == 0 {
            return config("max hidden dimension must be >= 1");
        }
        Ok(())
    }

    /// The block whose sparsity is searched.
    pub fn sparsified_block(&self) -> BlockId {
        if self.input_dim >= self.output_dim {
            BlockId::Hx
        } else {
            BlockId::Hy
        }
    }

    /// Dense spec with the searched block at sparsity `s` and hidden size `h`.
    pub fn candidate(&self, s: f64, h: usize) -> BlockSpec {
        let mut spec = BlockSpec::uniform(self.input_dim, h, self.output_dim, 1.0);
        spec.block_mut(self.sparsified_block()).sparsity = s;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceResult {
    pub spec: BlockSpec,
    pub achieved_hp: f64,
    pub nominal_total: f64,
    pub sparsified_block: BlockId,
    pub sparsity: f64,
}

/// Sparsity grid `step, 2·step, …` up to and including 1.0.
///
/// When `1/step` is an integer the points are computed as `k / n` so that
/// e.g. a step of 0.01 yields exactly the decimals 0.01 … 1.00.
pub fn sparsity_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() < 1e-9 {
        let n = n as usize;
        return (1..=n).map(|k| k as f64 / n as f64).collect();
    }
    let mut grid: Vec<f64> = (1..).map(|k| k as f64 * step).take_while(|&s| s < 1.0 - 1e-9).collect();
    grid.push(1.0);
    grid
}

/// Nominal hidden proportion: the hidden-row share of expected counts held by
/// `Hh`. An empty hidden row reports 0.
pub fn nominal_hidden_proportion(spec: &BlockSpec) -> f64 {
    nominal_param_count(spec).hidden_proportion().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    s: f64,
    h: usize,
    hp: f64,
    total: f64,
    diff: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        if self.diff < other.diff - HP_TIE_EPS {
            return true;
        }
        if self.diff > other.diff + HP_TIE_EPS {
            return false;
        }
        if self.total > other.total + TOTAL_TIE_EPS {
            return true;
        }
        if self.total < other.total - TOTAL_TIE_EPS {
            return false;
        }
        self.h < other.h
    }
}

pub fn balance(req: &BalanceRequest) -> Result<BalanceResult> {
    req.validate()?;
    let dense_one = nominal_param_count(&req.candidate(1.0, 1)).total;
    if dense_one > req.budget as f64 {
        return config(format!(
            "budget {} is infeasible: the dense network with hidden_dim=1 already needs {dense_one} parameters",
            req.budget
        ));
    }

    let eval = |s: f64, h: usize| {
        let spec = req.candidate(s, h);
        let n = nominal_param_count(&spec);
        let hp = n.hidden_proportion().unwrap_or(0.0);
        Candidate {
            s,
            h,
            hp,
            total: n.total,
            diff: (hp - req.target_hp).abs(),
        }
    };

    let mut best: Option<Candidate> = None;
    for s in sparsity_grid(req.step) {
        let cap = match max_hidden_dim(&req.candidate(s, 1), req.budget) {
            Ok(h) => h.min(req.max_hidden),
            Err(_) => continue,
        };
        // The hidden proportion grows strictly with h at fixed s, so only the
        // two hidden sizes straddling the target can be optimal.
        let (mut lo, mut hi) = (1usize, cap + 1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if eval(s, mid).hp >= req.target_hp {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        for h in [lo.saturating_sub(1), lo] {
            if h == 0 || h > cap {
                continue;
            }
            let c = eval(s, h);
            if best.as_ref().is_none_or(|b| c.better_than(b)) {
                best = Some(c);
            }
        }
    }

    let Some(best) = best else {
        return config(format!(
            "no feasible (sparsity, hidden_dim) pair: budget {} with max_hidden {}",
            req.budget, req.max_hidden
        ));
    };
    let mut spec = req.candidate(best.s, best.h);
    fan_in_init(&mut spec);
    Ok(BalanceResult {
        spec,
        achieved_hp: best.hp,
        nominal_total: best.total,
        sparsified_block: req.sparsified_block(),
        sparsity: best.s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_exact_decimals() {
        let g = sparsity_grid(0.01);
        assert_eq!(g.len(), 100);
        assert_eq!(g[7], 0.08);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = sparsity_grid(0.3);
        assert_eq!(g, vec![0.3, 0.6, 0.8999999999999999, 1.0]);
    }

    #[test]
    fn nominal_hp_examples() {
        let mut spec = BlockSpec::uniform(2500, 186, 10, 1.0);
        spec.block_mut(BlockId::Hx).sparsity = 0.08;
        let hp = nominal_hidden_proportion(&spec);
        assert!((hp - 186.0 / (200.0 + 186.0 + 10.0)).abs() < 1e-12);
        assert!((hp - 0.4697).abs() < 1e-4);

        assert!((nominal_hidden_proportion(&BlockSpec::uniform(5, 5, 5, 1.0)) - 1.0 / 3.0).abs() < 1e-15);

        spec.block_mut(BlockId::Hh).sparsity = 0.0;
        assert_eq!(nominal_hidden_proportion(&spec), 0.0);
    }

    #[test]
    fn hp_increasing_in_hidden_dim() {
        for s in [0.01, 0.08, 0.5, 1.0] {
            let req = BalanceRequest::new(2500, 10, 1);
            let hps: Vec<f64> = (1..=1000).map(|h| nominal_hidden_proportion(&req.candidate(s, h))).collect();
            assert!(hps.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn hy_branch_for_wide_outputs() {
        let req = BalanceRequest::new(5, 40, 5_000);
        let r = balance(&req).unwrap();
        assert_eq!(r.sparsified_block, BlockId::Hy);
        assert!(r.nominal_total <= 5_000.0);
    }

    #[test]
    fn infeasible_budget() {
        let err = balance(&BalanceRequest::new(2500, 10, 1000)).unwrap_err();
        assert!(err.to_string().contains("infeasible"));
        let mut req = BalanceRequest::new(10, 10, 10_000);
        req.target_hp = 1.0;
        assert!(balance(&req).is_err());
        req.target_hp = 0.5;
        req.step = 0.0;
        assert!(balance(&req).is_err());
    }

    #[test]
    fn deterministic() {
        let req = BalanceRequest::new(100, 6, 5_000);
        assert_eq!(balance(&req).unwrap(), balance(&req).unwrap());
    }
}
