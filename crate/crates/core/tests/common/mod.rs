//! Independent reference implementations used as test oracles. Shared by
//! the core integration tests and the acceptance suite.
#![allow(dead_code)]

use brnn_core::rnn::{BatchTargets, LossKind, SequenceModel};
use brnn_core::Matrix;

/// Central finite differences with step `h` over every parameter in
/// `params()` order, compared with the analytic gradient. Returns the worst
/// relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn fd_max_rel_error<M: SequenceModel + Clone>(
    model: &M,
    seq: &[Matrix],
    targets: &BatchTargets,
    kind: LossKind,
    h: f64,
    floor: f64,
) -> f64 {
    let (_, analytic) = model.loss_and_grad(seq, targets, kind).unwrap();
    let base = model.params();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p).unwrap();
        let up = probe.loss_and_grad(seq, targets, kind).unwrap().0;
        p[i] = base[i] - h;
        probe.set_params(&p).unwrap();
        let down = probe.loss_and_grad(seq, targets, kind).unwrap().0;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    worst
}

/// Plain triple-loop product.
pub fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i][p] * b[p][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// Classic single-vector RNN: `h_t = tanh(W_x x_t + W_h h_{t-1} + b_h)`,
/// `y_t = W_y h_t + b_y`, `h_0 = 0`. Returns `(h_1..h_T, y_1..y_T)`.
pub fn classic_rnn(
    wx: &[Vec<f64>],
    wh: &[Vec<f64>],
    wy: &[Vec<f64>],
    bh: &[f64],
    by: &[f64],
    xs: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let hd = wh.len();
    let mut h = vec![0.0; hd];
    let (mut hs, mut ys) = (Vec::new(), Vec::new());
    for x in xs {
        let mut next = vec![0.0; hd];
        for i in 0..hd {
            let mut a = bh[i];
            for (j, v) in x.iter().enumerate() {
                a += wx[i][j] * v;
            }
            for j in 0..hd {
                a += wh[i][j] * h[j];
            }
            next[i] = a.tanh();
        }
        h = next;
        let y: Vec<f64> = (0..wy.len())
            .map(|i| by[i] + (0..hd).map(|j| wy[i][j] * h[j]).sum::<f64>())
            .collect();
        hs.push(h.clone());
        ys.push(y);
    }
    (hs, ys)
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Hidden proportion of the single-sparsified family from its closed
/// form, `h / (s·a + h + b)` where `a` is the sparsified block's input
/// width and `b` the other off-centre width.
pub fn family_hp(h: usize, s: f64, a: usize, b: usize) -> f64 {
    let h = h as f64;
    (h * h) / (s * a as f64 * h + h * h + b as f64 * h)
}

/// Nominal total of the single-sparsified family counted term by term.
pub fn family_total(x: usize, y: usize, h: usize, s: f64, sparsify_hx: bool) -> f64 {
    let (x, y, hf) = (x as f64, y as f64, h as f64);
    let (hx, hy) = if sparsify_hx { (s * hf * x, hf * y) } else { (hf * x, s * hf * y) };
    hx + hf * hf + hy + y * x + y * hf + y * y + hf + y
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBest {
    pub s: f64,
    pub h: usize,
    pub hp: f64,
    pub total: f64,
}

/// Scores every `(s, h)` with `s = k/100` and `h` in `1..=h_max`: feasible
/// when the nominal total fits the budget, ranked by distance to the
/// target, then larger total, then smaller `h`.
pub fn grid_oracle(x: usize, y: usize, budget: usize, target: f64, h_max: usize) -> Option<GridBest> {
    let hx = x >= y;
    let (a, b) = if hx { (x, y) } else { (y, x) };
    let mut best: Option<GridBest> = None;
    for k in 1..=100 {
        let s = k as f64 / 100.0;
        for h in 1..=h_max {
            let total = family_total(x, y, h, s, hx);
            if total > budget as f64 {
                continue;
            }
            let hp = family_hp(h, s, a, b);
            let c = GridBest { s, h, hp, total };
            let better = match best {
                None => true,
                Some(o) => {
                    let (dc, dn) = ((hp - target).abs(), (o.hp - target).abs());
                    if (dc - dn).abs() > 1e-12 {
                        dc < dn
                    } else if (total - o.total).abs() > 1e-6 {
                        total > o.total
                    } else {
                        h < o.h
                    }
                }
            };
            if better {
                best = Some(c);
            }
        }
    }
    best
}

/// Regression-tree oracle: recursive partition that tries every feature
/// and every midpoint between distinct sorted values, computing child
/// squared errors directly from their means. Leaves hold the mean target
/// summed in row order.
pub fn brute_tree_predict(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    min_leaf: usize,
    max_depth: usize,
    depth: usize,
    query: &[f64],
) -> f64 {
    let mean = |r: &[usize]| r.iter().map(|&i| y[i]).sum::<f64>() / r.len() as f64;
    let sse = |r: &[usize]| {
        let m = r.iter().map(|&i| y[i]).sum::<f64>() / r.len() as f64;
        r.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum::<f64>()
    };
    let here = mean(rows);
    let pure = rows.iter().all(|&i| y[i] == y[rows[0]]);
    if depth >= max_depth || rows.len() < 2 * min_leaf || pure {
        return here;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let t = if t < w[1] { t } else { w[0] };
            let l: Vec<usize> = rows.iter().copied().filter(|&i| x[i][f] <= t).collect();
            let r: Vec<usize> = rows.iter().copied().filter(|&i| x[i][f] > t).collect();
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let s = sse(&l) + sse(&r);
            if best.is_none_or(|(bs, _, _)| s < bs - 1e-12 * (1.0 + sse(rows))) {
                best = Some((s, f, t));
            }
        }
    }
    match best {
        Some((s, f, t)) if s < sse(rows) * (1.0 - 1e-12) - 1e-12 => {
            let side: Vec<usize> = rows.iter().copied().filter(|&i| (x[i][f] <= t) == (query[f] <= t)).collect();
            brute_tree_predict(x, y, &side, min_leaf, max_depth, depth + 1, query)
        }
        _ => here,
    }
}

/// Upper 1% points of the chi-square distribution by degrees of freedom.
pub fn chi2_crit_01(df: usize) -> f64 {
    match df {
        4 => 13.277,
        8 => 20.090,
        _ => panic!("no table entry for df={df}"),
    }
}
