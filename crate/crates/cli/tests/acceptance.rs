//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! A failing criterion is reported, not hidden: the process exits non-zero
//! only when a check crashes, or on any FAIL when `BRNN_ACCEPTANCE_STRICT`
//! is set. `BRNN_ACCEPTANCE_ONLY=1,4,9` restricts the run to some criteria
//! (9 needs 8's sweep and runs it if 8 was skipped).

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use brnn_core::data::{rad_lite_generate, split};
use brnn_core::rnn::train::{best_accuracy, train};
use brnn_core::rnn::{adam_step, AdamConfig, AdamState, BatchTargets, LossKind};
use brnn_core::sweep::{
    bin_summary, forest_eval, forest_fit, forest_predict, forest_train, holdout_split, run_sweep, BinMetric,
    BudgetMode, ForestConfig, RunRecord, SweepConfig,
};
use brnn_core::{
    balance, count_report, instantiate, nominal_param_count, preset, BalanceRequest, BlockId, BlockRnn, BlockSpec,
    Matrix, Preset, RngStream, TrainConfig, WeightSpace,
};
use common::{brute_tree_predict, classic_rnn, fd_max_rel_error, grid_oracle, to_rows};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn within_time(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

fn c1_hidden_proportion() -> Outcome {
    let t = Instant::now();
    let spec = preset(Preset::RadVaried, 2500, 10, 100_000).unwrap();
    let hps: Vec<f64> = (0..10)
        .map(|s| count_report(&instantiate(&spec, &RngStream::new(s, 0)).unwrap()).hidden_proportion().unwrap())
        .collect();
    let worst = hps.iter().map(|h| (h - 0.22).abs()).fold(0.0, f64::max);
    let el = t.elapsed();
    outcome(
        worst <= 0.02 && within_time(el, 1.0),
        format!("h={} realized hp {:.4}..{:.4} over 10 seeds, {:.2}s", spec.hidden_dim, hps.iter().copied().fold(1.0, f64::min), hps.iter().copied().fold(0.0, f64::max), el.as_secs_f64()),
    )
}

fn c2_balancer() -> Outcome {
    let t = Instant::now();
    let r = balance(&BalanceRequest::new(2500, 10, 100_000)).unwrap();
    let el = t.elapsed();
    let oracle = grid_oracle(2500, 10, 100_000, 0.5, 4096).unwrap();
    // Decimal interval bounds with slack for binary rounding of 0.47 ± 0.03.
    let pass = r.sparsified_block == BlockId::Hx
        && (r.sparsity - 0.08).abs() <= 0.02 + 1e-12
        && (r.achieved_hp - 0.47).abs() <= 0.03 + 1e-12
        && (95_000.0..=100_000.0).contains(&r.nominal_total)
        && (r.sparsity, r.spec.hidden_dim) == (oracle.s, oracle.h)
        && within_time(el, 5.0);
    outcome(
        pass,
        format!(
            "block {} sparsity {} h={} nominal hp {:.4} total {}; oracle ({}, {}); {:.2}s",
            r.sparsified_block.key(),
            r.sparsity,
            r.spec.hidden_dim,
            r.achieved_hp,
            r.nominal_total,
            oracle.s,
            oracle.h,
            el.as_secs_f64()
        ),
    )
}

fn c3_counting() -> Outcome {
    let mut rng = RngStream::new(303, 0);
    let mut worst_nominal = 0.0f64;
    let mut worst_z = 0.0f64;
    for k in 0..50u64 {
        let (x, h, y) = (1 + rng.below(60) as usize, 1 + rng.below(60) as usize, 1 + rng.below(20) as usize);
        let mut spec = BlockSpec::uniform(x, h, y, 1.0);
        for b in spec.blocks.iter_mut() {
            b.sparsity = match rng.below(5) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.uniform(),
            };
        }
        let dims = |id: BlockId| -> (f64, f64) {
            let d = |top: bool| if top { h as f64 } else { y as f64 };
            let col = match id {
                BlockId::Hx | BlockId::Yx => x as f64,
                BlockId::Hh | BlockId::Yh => h as f64,
                BlockId::Hy | BlockId::Yy => y as f64,
            };
            (d(id.is_top_row()), col)
        };
        let closed: Vec<f64> = BlockId::ALL
            .iter()
            .map(|&id| {
                let (r, c) = dims(id);
                spec.block(id).sparsity * r * c
            })
            .collect();
        let total: f64 = closed.iter().sum::<f64>() + (h + y) as f64;
        let n = nominal_param_count(&spec);
        for id in BlockId::ALL {
            let want = closed[id.index()];
            worst_nominal = worst_nominal.max((n.block(id) - want).abs() / want.max(1.0));
        }
        worst_nominal = worst_nominal.max((n.total - total).abs() / total);
        let rep = count_report(&instantiate(&spec, &RngStream::new(k, 7)).unwrap());
        for id in BlockId::ALL {
            let (r, c) = dims(id);
            let p = spec.block(id).sparsity;
            let sigma = (r * c * p * (1.0 - p)).sqrt();
            let dev = (rep.block(id) as f64 - p * r * c).abs();
            let z = if sigma == 0.0 {
                if dev == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                dev / sigma
            };
            worst_z = worst_z.max(z);
        }
    }
    outcome(
        worst_nominal <= 1e-14 && worst_z <= 4.0,
        format!("50 specs: worst nominal rel error {worst_nominal:.1e}, worst realized deviation {worst_z:.2} sigma"),
    )
}

fn mixed_spec(x: usize, h: usize, y: usize) -> BlockSpec {
    let mut spec = BlockSpec::uniform(x, h, y, 1.0);
    for (id, s) in BlockId::ALL.into_iter().zip([0.6, 1.0, 0.5, 0.7, 1.0, 0.4]) {
        let b = spec.block_mut(id);
        b.sparsity = s;
        b.std = 0.5;
        b.mean = 0.05;
    }
    spec
}

fn random_seq(rng: &mut RngStream, dim: usize, batch: usize, steps: usize) -> Vec<Matrix> {
    (0..steps).map(|_| rng.normal_matrix(dim, batch, 0.0, 1.0).unwrap()).collect()
}

fn c4_gradients() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..5u64 {
        for kind in [LossKind::CrossEntropyFinal, LossKind::MseAllSteps] {
            for (x, h, y, steps) in [(2, 3, 2, 3), (3, 4, 2, 5), (5, 8, 3, 6)] {
                let mut model = BlockRnn::from_spec(&mixed_spec(x, h, y), &RngStream::new(seed, 0)).unwrap();
                let mut rng = RngStream::new(seed, 1);
                model.weights.bias_h = (0..h).map(|_| 0.1 * rng.normal()).collect();
                model.weights.bias_y = (0..y).map(|_| 0.1 * rng.normal()).collect();
                let seq = random_seq(&mut rng, x, 2, steps);
                let tg = match kind {
                    LossKind::CrossEntropyFinal => BatchTargets::Classes((0..2).map(|_| rng.below(y as u64) as usize).collect()),
                    LossKind::MseAllSteps => BatchTargets::Sequence(random_seq(&mut rng, y, 2, steps)),
                };
                worst = worst.max(fd_max_rel_error(&model, &seq, &tg, kind, 1e-5, 1e-6));
                checked += 1;
            }
        }
    }
    let el = t.elapsed();
    outcome(
        worst <= 1e-4 && within_time(el, 30.0),
        format!("{checked} nets, worst relative error {worst:.2e}, {:.2}s", el.as_secs_f64()),
    )
}

fn masked_entries_zero(ws: &WeightSpace) -> (bool, usize) {
    let mut masked = 0;
    let mut ok = true;
    for id in BlockId::ALL {
        let b = ws.block(id);
        for (v, &on) in b.values().as_slice().iter().zip(b.mask().bits()) {
            if !on {
                masked += 1;
                ok &= v.to_bits() == 0;
            }
        }
    }
    (ok, masked)
}

fn c5_masks() -> Outcome {
    let mut spec = BlockSpec::uniform(6, 9, 4, 0.5);
    spec.blocks.iter_mut().for_each(|b| b.std = 0.5);
    let mut model = BlockRnn::from_spec(&spec, &RngStream::new(55, 0)).unwrap();
    let every_block_sparse = BlockId::ALL.iter().all(|&id| {
        let m = model.weights.block(id).mask();
        m.count_true() < m.bits().len()
    });
    let mut state = AdamState::new(model.weights.trainable_len());
    let cfg = AdamConfig { learning_rate: 0.05, ..Default::default() };
    let mut rng = RngStream::new(56, 0);
    for step in 0..200 {
        let seq = random_seq(&mut rng, 6, 4, 5);
        let (kind, tg) = if step % 2 == 0 {
            (LossKind::CrossEntropyFinal, BatchTargets::Classes((0..4).map(|_| rng.below(4) as usize).collect()))
        } else {
            (LossKind::MseAllSteps, BatchTargets::Sequence(random_seq(&mut rng, 4, 4, 5)))
        };
        let (_, g) = model.backward(&seq, &tg, kind).unwrap();
        adam_step(&mut model.weights, &g, &mut state, &cfg).unwrap();
    }
    let (ok, masked) = masked_entries_zero(&model.weights);
    outcome(
        ok && every_block_sparse,
        format!("200 Adam steps; {masked} mask-false entries across all six blocks, all bit-exact +0.0: {ok}"),
    )
}

fn c6_classic() -> Outcome {
    let mut rng = RngStream::new(606, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (x, h, y, t) = (1 + rng.below(5) as usize, 1 + rng.below(7) as usize, 1 + rng.below(4) as usize, 7);
        let mut spec = BlockSpec::uniform(x, h, y, 1.0);
        for id in [BlockId::Hy, BlockId::Yx, BlockId::Yy] {
            spec.block_mut(id).sparsity = 0.0;
        }
        spec.blocks.iter_mut().for_each(|b| b.std = 0.7);
        let mut model = BlockRnn::from_spec(&spec, &RngStream::new(rng.next_u64(), 0)).unwrap();
        model.weights.bias_h = (0..h).map(|_| 0.3 * rng.normal()).collect();
        model.weights.bias_y = (0..y).map(|_| 0.3 * rng.normal()).collect();
        let xs: Vec<Vec<f64>> = (0..t).map(|_| (0..x).map(|_| rng.normal()).collect()).collect();
        let seq: Vec<Matrix> = xs.iter().map(|v| Matrix::from_vec(x, 1, v.clone()).unwrap()).collect();
        let states = model.run_sequence(&seq).unwrap();
        let w = &model.weights;
        let (hs, ys) = classic_rnn(
            &to_rows(w.block(BlockId::Hx).values()),
            &to_rows(w.block(BlockId::Hh).values()),
            &to_rows(w.block(BlockId::Yh).values()),
            &w.bias_h,
            &w.bias_y,
            &xs,
        );
        // The block output row reads the previous hidden state: block output
        // k+1 is classic output k.
        for k in 0..t {
            for i in 0..h {
                worst = worst.max((states[k].h.get(i, 0) - hs[k][i]).abs());
            }
            if k + 1 < t {
                for i in 0..y {
                    worst = worst.max((states[k + 1].y.get(i, 0) - ys[k][i]).abs());
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("20 trials, worst entrywise difference {worst:.1e}"))
}

fn c7_directional() -> Outcome {
    let t = Instant::now();
    let bal = balance(&BalanceRequest::new(100, 6, 5000)).unwrap().spec;
    let specs = [
        ("balanced", bal),
        ("uniform20", preset(Preset::Uniform20, 100, 6, 5000).unwrap()),
        ("ah_varied", preset(Preset::AhVaried, 100, 6, 5000).unwrap()),
    ];
    let mut best = vec![Vec::new(); specs.len()];
    for seed in 0..5u64 {
        let mut rng = RngStream::new(1000 + seed, 0);
        let data = split(rad_lite_generate(2500, 5, 10, &mut rng).unwrap(), 0.2, &mut rng).unwrap();
        assert_eq!((data.train.len(), data.validation.len()), (2000, 500));
        for (k, (_, spec)) in specs.iter().enumerate() {
            let (_, logs) = train(spec, &data, &TrainConfig { seed, ..Default::default() }).unwrap();
            best[k].push(best_accuracy(&logs).unwrap());
        }
    }
    let med: Vec<f64> = best.into_iter().map(median).collect();
    let chance = 1.0 / 6.0;
    let el = t.elapsed();
    let pass = med[0] >= med[1] && med[1] > med[2] && med.iter().all(|&m| m > chance) && within_time(el, 600.0);
    let parts: Vec<String> = specs.iter().zip(&med).map(|((n, s), m)| format!("{n}(h={}) {m:.3}", s.hidden_dim)).collect();
    outcome(pass, format!("median best val acc: {}; {:.0}s", parts.join(", "), el.as_secs_f64()))
}

fn sweep_records() -> (Vec<RunRecord>, Duration) {
    let t = Instant::now();
    let mut rng = RngStream::new(7, 0);
    let data = split(rad_lite_generate(1000, 5, 10, &mut rng).unwrap(), 0.2, &mut rng).unwrap();
    let cfg = SweepConfig::new("rad_lite", 200, BudgetMode::Fixed { budget: 10_000 }, 42);
    let recs = run_sweep(&cfg, &data, None).unwrap();
    (recs, t.elapsed())
}

fn c8_bins(recs: &[RunRecord], el: Duration) -> Outcome {
    let hp = bin_summary(recs, BinMetric::HiddenProportion).unwrap();
    let ms = bin_summary(recs, BinMetric::ModelSparsity).unwrap();
    let m = |t: &brnn_core::sweep::BinTable, b: usize| t.bins[b].mean_min_loss;
    let below = |a: Option<f64>, b: Option<f64>| matches!((a, b), (Some(a), Some(b)) if a < b);
    let hp_ok = below(m(&hp, 1), m(&hp, 0));
    let ms_ok = below(m(&ms, 0), m(&ms, 2));
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "none".into());
    outcome(
        hp_ok && ms_ok && recs.len() == 200 && within_time(el, 3600.0),
        format!(
            "{} runs ({} unstable), {:.0}s; hp [.2,.4) {} vs [0,.2) {} ({}); sparsity [0,.2) {} vs [.4,.6) {} ({})",
            recs.len(),
            recs.iter().filter(|r| !r.stable).count(),
            el.as_secs_f64(),
            fmt(m(&hp, 1)),
            fmt(m(&hp, 0)),
            if hp_ok { "ok" } else { "reversed" },
            fmt(m(&ms, 0)),
            fmt(m(&ms, 2)),
            if ms_ok { "ok" } else { "reversed" },
        ),
    )
}

fn c9_forest(recs: &[RunRecord]) -> Outcome {
    let (train_set, held) = holdout_split(recs, 0.2, 1).unwrap();
    let cfg = ForestConfig { trees: 200, max_depth: 10, seed: 3, ..Default::default() };
    let model = forest_train(&train_set, &cfg).unwrap();
    let report = forest_eval(&model, &held).unwrap();
    let rho = report.spearman.unwrap_or(f64::NAN);

    let mut oracle_ok = true;
    let mut cases = 0;
    for seed in 0..20u64 {
        let mut rng = RngStream::new(seed, 9);
        let n = 5 + rng.below(46) as usize;
        let d = 1 + rng.below(3) as usize;
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.below(12) as f64 * 0.5).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>().cos() + 0.2 * rng.normal()).collect();
        for (min_leaf, depth) in [(1, 2), (2, 4), (1, 10), (3, 10)] {
            let fc = ForestConfig { trees: 1, max_depth: depth, min_leaf, feature_fraction: 1.0, bootstrap: false, seed };
            let m = forest_fit(&x, &y, &fc).unwrap();
            let rows: Vec<usize> = (0..n).collect();
            for _ in 0..20 {
                let q: Vec<f64> = (0..d).map(|_| rng.uniform_range(-0.5, 6.0)).collect();
                oracle_ok &= forest_predict(&m, &q).unwrap() == brute_tree_predict(&x, &y, &rows, min_leaf, depth, 0, &q);
                cases += 1;
            }
        }
    }
    outcome(
        rho >= 0.6 && oracle_ok,
        format!(
            "spearman {rho:.3} on {} held-out runs ({} train); single-tree oracle agreement on {cases} queries: {oracle_ok}",
            held.len(),
            train_set.len()
        ),
    )
}

fn cli(dir: &Path, threads: &str, args: &[&str]) {
    let mut argv = vec!["brnn", "--seed", "11", "--threads", threads, "--out-dir", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    let code = brnn_cli::dispatch(argv);
    assert_eq!(code, 0, "{args:?}");
}

fn pipeline(dir: &Path, threads: &str) {
    let p = |f: &str| dir.join(f).to_str().unwrap().to_string();
    let (data, reg, spec, forest) = (p("d.bin"), p("registry.jsonl"), p("spec.txt"), p("forest.json"));
    cli(dir, threads, &["data", "--task", "rad-lite", "--count", "300", "--seq-len", "4", "--side", "8", "--output", &data]);
    cli(dir, threads, &["balance", "--input-dim", "64", "--output-dim", "5", "--budget", "3000"]);
    cli(dir, threads, &["train", "--data", &data, "--spec", &spec, "--epochs", "3"]);
    cli(dir, threads, &["sweep", "--data", &data, "--runs", "24", "--budget", "2000", "--epochs", "3"]);
    cli(dir, threads, &["bins", "--registry", &reg]);
    cli(dir, threads, &["meta-train", "--registry", &reg, "--trees", "40"]);
    cli(dir, threads, &["meta-eval", "--registry", &reg, "--model", &forest]);
    for kind in ["curves", "scatter", "bins", "predicted-vs-actual", "features"] {
        cli(dir, threads, &["export", "--registry", &reg, "--kind", kind, "--model", &forest]);
    }
}

fn c10_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "2");
    let mut names: Vec<String> =
        std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| std::fs::read(a.path().join(n)).ok() != std::fs::read(b.path().join(n)).ok())
        .collect();
    let count_b = std::fs::read_dir(b.path()).unwrap().count();
    outcome(
        differing.is_empty() && count_b == names.len(),
        format!("{} files compared (1 vs 2 threads): {}; differing: {differing:?}", names.len(), names.join(" ")),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> (Outcome, bool) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => (o, false),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (outcome(false, format!("crashed: {msg}")), true)
        }
    }
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("BRNN_ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|v| v.contains(&k));
    let strict = std::env::var_os("BRNN_ACCEPTANCE_STRICT").is_some();

    let mut results: Vec<(usize, &str, Outcome, bool)> = Vec::new();
    let simple: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "hidden-proportion reproduction", c1_hidden_proportion),
        (2, "balancer reproduction", c2_balancer),
        (3, "counting exactness", c3_counting),
        (4, "gradient correctness", c4_gradients),
        (5, "mask preservation", c5_masks),
        (6, "classic-RNN equivalence", c6_classic),
        (7, "directional performance", c7_directional),
    ];
    for (k, name, f) in simple {
        if wanted(k) {
            let (o, crashed) = guarded(f);
            report(k, name, &o);
            results.push((k, name, o, crashed));
        }
    }
    if wanted(8) || wanted(9) {
        match catch_unwind(sweep_records) {
            Ok((recs, el)) => {
                for (k, name) in [(8, "bin-trend direction"), (9, "meta-predictor quality")] {
                    if wanted(k) {
                        let (o, crashed) = guarded(|| if k == 8 { c8_bins(&recs, el) } else { c9_forest(&recs) });
                        report(k, name, &o);
                        results.push((k, name, o, crashed));
                    }
                }
            }
            Err(_) => {
                let o = outcome(false, "crashed: sweep failed");
                report(8, "bin-trend direction", &o);
                results.push((8, "bin-trend direction", o, true));
            }
        }
    }
    if wanted(10) {
        let (o, crashed) = guarded(c10_determinism);
        report(10, "determinism", &o);
        results.push((10, "determinism", o, crashed));
    }

    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    let crashed = results.iter().any(|r| r.3);
    if crashed || (strict && passed < results.len()) {
        std::process::exit(1);
    }
}

fn report(k: usize, name: &str, o: &Outcome) {
    println!("[{}] criterion {k:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}
