mod common;

use brnn_core::data::{rad_lite_generate, split};
use brnn_core::sweep::{
    forest_fit, forest_predict, forest_train, sample_hparams, BudgetMode, ForestConfig, Registry, SamplingRanges,
    SweepConfig,
};
use brnn_core::{count_report, instantiate, RngStream};
use common::brute_tree_predict;

#[test]
fn sparsity_marginals_pass_ks() {
    let mut rng = RngStream::new(21, 0);
    let ranges = SamplingRanges::default();
    let draws: Vec<_> = (0..10_000).map(|_| sample_hparams(&mut rng, &ranges).unwrap()).collect();
    let crit = 1.628 / (10_000f64).sqrt();
    for b in 0..6 {
        let mut v: Vec<f64> = draws.iter().map(|d| d.blocks[b].sparsity).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let cdf = |x: f64| (x - 0.01) / 0.99;
        let d = v
            .iter()
            .enumerate()
            .map(|(i, &x)| (cdf(x) - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf(x)).abs()))
            .fold(0.0, f64::max);
        assert!(d < crit, "block {b}: D = {d}");
    }
}

#[test]
fn single_tree_matches_brute_force() {
    for seed in 0..12u64 {
        let mut rng = RngStream::new(seed, 0);
        let n = 10 + rng.below(41) as usize;
        let d = 1 + rng.below(3) as usize;
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| (rng.below(20) as f64) / 4.0).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].sin() + 0.3 * rng.normal()).collect();
        for (min_leaf, depth) in [(1, 3), (2, 10), (3, usize::MAX)] {
            let cfg = ForestConfig { trees: 1, max_depth: depth, min_leaf, feature_fraction: 1.0, bootstrap: false, seed };
            let m = forest_fit(&x, &y, &cfg).unwrap();
            let rows: Vec<usize> = (0..n).collect();
            for _ in 0..30 {
                let q: Vec<f64> = (0..d).map(|_| rng.uniform_range(-0.5, 5.5)).collect();
                let want = brute_tree_predict(&x, &y, &rows, min_leaf, depth, 0, &q);
                assert_eq!(forest_predict(&m, &q).unwrap(), want, "seed {seed} leaf {min_leaf} depth {depth}");
            }
        }
    }
}

#[test]
fn sweep_is_reproducible_and_accounted() {
    let mut rng = RngStream::new(8, 0);
    let data = split(rad_lite_generate(60, 3, 8, &mut rng).unwrap(), 0.25, &mut rng).unwrap();
    let mut cfg = SweepConfig::new("rad_lite", 12, BudgetMode::Fixed { budget: 3000 }, 5);
    cfg.epochs = 2;
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let mut reg = Registry::open(&path).unwrap();
        brnn_core::sweep::run_sweep(&cfg, &data, Some(&mut reg)).unwrap();
        (std::fs::read(&path).unwrap(), reg.records().unwrap())
    };
    let (a, recs) = run("a.jsonl");
    let (b, _) = run("b.jsonl");
    assert_eq!(a, b);
    assert_eq!(recs.len(), 12);
    for r in &recs {
        assert!(r.total_params as f64 <= 1.02 * 3000.0, "{}", r.total_params);
        let ws = instantiate(&r.spec(), &RngStream::new(r.seed, 0)).unwrap();
        assert_eq!(count_report(&ws).hidden_proportion.unwrap(), r.hidden_proportion);
    }
    let f = forest_train(&recs, &ForestConfig { trees: 20, ..Default::default() }).unwrap();
    assert_eq!(f.trees.len(), 20);
    assert!(forest_train(&recs[..5], &ForestConfig::default()).is_err());
}
