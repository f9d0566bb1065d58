mod common;

use brnn_core::rnn::{BatchTargets, LossKind, Lstm, SequenceModel};
use brnn_core::{BlockId, BlockRnn, BlockSpec, Matrix, RngStream};
use common::fd_max_rel_error;

const STEP: f64 = 1e-5;
// Relative error is measured against max(|analytic|, |numeric|, FLOOR) so
// that entries with near-zero gradient are judged on absolute error.
const FLOOR: f64 = 1e-6;

fn random_seq(rng: &mut RngStream, dim: usize, batch: usize, steps: usize) -> Vec<Matrix> {
    (0..steps).map(|_| rng.normal_matrix(dim, batch, 0.0, 1.0).unwrap()).collect()
}

fn targets(rng: &mut RngStream, kind: LossKind, y: usize, batch: usize, steps: usize) -> BatchTargets {
    match kind {
        LossKind::CrossEntropyFinal => BatchTargets::Classes((0..batch).map(|_| rng.below(y as u64) as usize).collect()),
        LossKind::MseAllSteps => BatchTargets::Sequence(random_seq(rng, y, batch, steps)),
    }
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

#[test]
fn block_rnn_matches_finite_differences() {
    for seed in 0..5u64 {
        for kind in [LossKind::CrossEntropyFinal, LossKind::MseAllSteps] {
            for (x, h, y, t) in [(3, 4, 2, 5), (5, 8, 3, 6)] {
                let mut model = BlockRnn::from_spec(&mixed_spec(x, h, y), &RngStream::new(seed, 0)).unwrap();
                let mut rng = RngStream::new(seed, 1);
                model.weights.bias_h = (0..h).map(|_| 0.1 * rng.normal()).collect();
                model.weights.bias_y = (0..y).map(|_| 0.1 * rng.normal()).collect();
                let seq = random_seq(&mut rng, x, 2, t);
                let tg = targets(&mut rng, kind, y, 2, t);
                let err = fd_max_rel_error(&model, &seq, &tg, kind, STEP, FLOOR);
                assert!(err <= 1e-4, "seed {seed} {kind} ({x},{h},{y},{t}): {err}");
            }
        }
    }
}

#[test]
fn masked_entries_have_zero_gradient() {
    let model = BlockRnn::from_spec(&mixed_spec(4, 6, 3), &RngStream::new(2, 0)).unwrap();
    let mut rng = RngStream::new(2, 1);
    let seq = random_seq(&mut rng, 4, 3, 4);
    let (_, g) = model.backward(&seq, &BatchTargets::Classes(vec![0, 1, 2]), LossKind::CrossEntropyFinal).unwrap();
    assert!(g.masks_respected());
    for id in BlockId::ALL {
        let b = g.block(id);
        for (v, &m) in b.values().as_slice().iter().zip(b.mask().bits()) {
            if !m {
                assert_eq!(v.to_bits(), 0);
            }
        }
    }
}

#[test]
fn zero_network_zero_target_has_zero_gradient() {
    let mut spec = BlockSpec::uniform(3, 4, 2, 1.0);
    for b in spec.blocks.iter_mut() {
        b.std = 0.0;
    }
    let model = BlockRnn::from_spec(&spec, &RngStream::new(0, 0)).unwrap();
    let mut rng = RngStream::new(1, 0);
    let seq = random_seq(&mut rng, 3, 2, 3);
    let tg = BatchTargets::Sequence(vec![Matrix::zeros(2, 2); 3]);
    let (loss, g) = model.backward(&seq, &tg, LossKind::MseAllSteps).unwrap();
    assert_eq!(loss, 0.0);
    assert!(g.params().iter().all(|&v| v == 0.0));
}

#[test]
fn lstm_matches_finite_differences() {
    for seed in 0..3u64 {
        for kind in [LossKind::CrossEntropyFinal, LossKind::MseAllSteps] {
            let mut model = Lstm::new(3, 4, 2, &RngStream::new(seed, 0)).unwrap();
            let mut rng = RngStream::new(seed, 1);
            let mut p = model.params();
            for v in p.iter_mut() {
                *v += 0.1 * rng.normal();
            }
            model.set_params(&p).unwrap();
            let seq = random_seq(&mut rng, 3, 2, 4);
            let tg = targets(&mut rng, kind, 2, 2, 4);
            let err = fd_max_rel_error(&model, &seq, &tg, kind, STEP, FLOOR);
            assert!(err <= 1e-4, "seed {seed} {kind}: {err}");
        }
    }
}
