//! Forward dynamics and backpropagation through time for the block RNN.
//!
//! One step computes
//!
//! ```text
//! H' = σ(W_hx·x + W_hh·H + W_hy·Y + b_h)
//! Y' =   W_yx·x + W_yh·H + W_yy·Y + b_y
//! ```
//!
//! from the previous `(H, Y)`, starting at zeros. The output row is linear;
//! any softmax lives in the loss.

use crate::block::{instantiate, BlockId, BlockSpec, WeightSpace};
use crate::error::{input, Error, Result};
use crate::rng::RngStream;
use crate::rnn::loss::{loss_with_grad, BatchTargets, LossKind};
use crate::rnn::SequenceModel;
use crate::tensor::{apply_activation, Activation, Matrix};

/// Hidden and output state for a batch of `n` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnState {
    pub h: Matrix,
    pub y: Matrix,
}

impl RnnState {
    pub fn zeros(hidden: usize, output: usize, batch: usize) -> Self {
        RnnState {
            h: Matrix::zeros(hidden, batch),
            y: Matrix::zeros(output, batch),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRnn {
    pub spec: BlockSpec,
    pub weights: WeightSpace,
}

/// Stored activations of one forward pass; index 0 holds the zero state.
struct Trace {
    pre: Vec<Matrix>,
    h: Vec<Matrix>,
    y: Vec<Matrix>,
}

impl BlockRnn {
    pub fn new(spec: BlockSpec, weights: WeightSpace) -> Result<Self> {
        spec.validate()?;
        for id in BlockId::ALL {
            if weights.block(id).shape() != spec.block_shape(id) {
                let (r, c) = weights.block(id).shape();
                let (er, ec) = spec.block_shape(id);
                return Err(Error::Shape {
                    op: "BlockRnn::new",
                    left_rows: r,
                    left_cols: c,
                    right_rows: er,
                    right_cols: ec,
                });
            }
        }
        if weights.bias_h.len() != spec.hidden_dim || weights.bias_y.len() != spec.output_dim {
            return input("bias lengths disagree with the spec");
        }
        Ok(BlockRnn { spec, weights })
    }

    pub fn from_spec(spec: &BlockSpec, rng: &RngStream) -> Result<Self> {
        BlockRnn::new(spec.clone(), instantiate(spec, rng)?)
    }

    pub fn activation(&self) -> Activation {
        self.spec.activation
    }

    fn check_shapes(&self, x: &Matrix, state: &RnnState) -> Result<()> {
        let n = x.cols();
        let expect = [
            (x.rows(), self.spec.input_dim),
            (state.h.rows(), self.spec.hidden_dim),
            (state.y.rows(), self.spec.output_dim),
            (state.h.cols(), n),
            (state.y.cols(), n),
        ];
        if expect.iter().any(|(a, b)| a != b) {
            return Err(Error::Shape {
                op: "forward_step",
                left_rows: x.rows(),
                left_cols: x.cols(),
                right_rows: state.h.rows(),
                right_cols: state.h.cols(),
            });
        }
        Ok(())
    }

    /// Hidden pre-activation and next output for one step.
    fn step_linear(&self, x: &Matrix, state: &RnnState) -> Result<(Matrix, Matrix)> {
        self.check_shapes(x, state)?;
        let n = x.cols();
        let w = &self.weights;
        let mut pre = Matrix::zeros(self.spec.hidden_dim, n);
        w.block(BlockId::Hx).accumulate_product(x, &mut pre);
        w.block(BlockId::Hh).accumulate_product(&state.h, &mut pre);
        w.block(BlockId::Hy).accumulate_product(&state.y, &mut pre);
        pre.add_row_bias(&w.bias_h)?;
        let mut y = Matrix::zeros(self.spec.output_dim, n);
        w.block(BlockId::Yx).accumulate_product(x, &mut y);
        w.block(BlockId::Yh).accumulate_product(&state.h, &mut y);
        w.block(BlockId::Yy).accumulate_product(&state.y, &mut y);
        y.add_row_bias(&w.bias_y)?;
        Ok((pre, y))
    }

    pub fn forward_step(&self, x: &Matrix, state: &RnnState) -> Result<RnnState> {
        let (pre, y) = self.step_linear(x, state)?;
        Ok(RnnState {
            h: apply_activation(&pre, self.activation()),
            y,
        })
    }

    /// States after each step, starting from the zero state.
    pub fn run_sequence(&self, seq: &[Matrix]) -> Result<Vec<RnnState>> {
        let Some(first) = seq.first() else {
            return input("run_sequence needs a non-empty sequence");
        };
        let mut state = RnnState::zeros(self.spec.hidden_dim, self.spec.output_dim, first.cols());
        let mut out = Vec::with_capacity(seq.len());
        for x in seq {
            state = self.forward_step(x, &state)?;
            out.push(state.clone());
        }
        Ok(out)
    }

    fn trace(&self, seq: &[Matrix]) -> Result<Trace> {
        let Some(first) = seq.first() else {
            return input("sequence must be non-empty");
        };
        let n = first.cols();
        let mut t = Trace {
            pre: Vec::with_capacity(seq.len() + 1),
            h: Vec::with_capacity(seq.len() + 1),
            y: Vec::with_capacity(seq.len() + 1),
        };
        t.pre.push(Matrix::zeros(self.spec.hidden_dim, n));
        t.h.push(Matrix::zeros(self.spec.hidden_dim, n));
        t.y.push(Matrix::zeros(self.spec.output_dim, n));
        for x in seq {
            let state = RnnState {
                h: t.h.last().unwrap().clone(),
                y: t.y.last().unwrap().clone(),
            };
            let (pre, y) = self.step_linear(x, &state)?;
            t.h.push(apply_activation(&pre, self.activation()));
            t.pre.push(pre);
            t.y.push(y);
        }
        Ok(t)
    }

    /// Loss and gradient over the trainable entries. Masked-off entries of the
    /// returned gradient are exactly zero. Non-finite intermediates yield
    /// `Error::Diverged` and no gradient.
    pub fn backward(&self, seq: &[Matrix], targets: &BatchTargets, kind: LossKind) -> Result<(f64, WeightSpace)> {
        let trace = self.trace(seq)?;
        let steps = seq.len();
        if trace.y.iter().chain(&trace.h).any(|m| !m.is_finite()) {
            return Err(Error::Diverged("non-finite activation in forward pass".into()));
        }
        let (loss, direct) = loss_with_grad(&trace.y[1..], targets, kind)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("loss is {loss}")));
        }

        let w = &self.weights;
        let act = self.activation();
        let mut grads = w.zeros_like();
        let n = seq[0].cols();
        let mut gh_carry = Matrix::zeros(self.spec.hidden_dim, n);
        let mut gy_carry = Matrix::zeros(self.spec.output_dim, n);

        for t in (1..=steps).rev() {
            let x = &seq[t - 1];
            let (h_prev, y_prev) = (&trace.h[t - 1], &trace.y[t - 1]);
            let mut gy = direct[t - 1].clone();
            gy.add_assign(&gy_carry)?;
            let mut ga = gh_carry;
            for ((g, &a), &h) in ga
                .as_mut_slice()
                .iter_mut()
                .zip(trace.pre[t].as_slice())
                .zip(trace.h[t].as_slice())
            {
                *g *= act.derivative(a, h);
            }

            grads.block_mut(BlockId::Hx).accumulate_outer(&ga, x);
            grads.block_mut(BlockId::Hh).accumulate_outer(&ga, h_prev);
            grads.block_mut(BlockId::Hy).accumulate_outer(&ga, y_prev);
            grads.block_mut(BlockId::Yx).accumulate_outer(&gy, x);
            grads.block_mut(BlockId::Yh).accumulate_outer(&gy, h_prev);
            grads.block_mut(BlockId::Yy).accumulate_outer(&gy, y_prev);
            for (b, r) in grads.bias_h.iter_mut().zip(0..) {
                *b += ga.row(r).iter().sum::<f64>();
            }
            for (b, r) in grads.bias_y.iter_mut().zip(0..) {
                *b += gy.row(r).iter().sum::<f64>();
            }

            gh_carry = Matrix::zeros(self.spec.hidden_dim, n);
            gy_carry = Matrix::zeros(self.spec.output_dim, n);
            if t > 1 {
                w.block(BlockId::Hh).accumulate_transpose_product(&ga, &mut gh_carry);
                w.block(BlockId::Yh).accumulate_transpose_product(&gy, &mut gh_carry);
                w.block(BlockId::Hy).accumulate_transpose_product(&ga, &mut gy_carry);
                w.block(BlockId::Yy).accumulate_transpose_product(&gy, &mut gy_carry);
            }
        }
        Ok((loss, grads))
    }
}

impl SequenceModel for BlockRnn {
    fn param_len(&self) -> usize {
        self.weights.trainable_len()
    }

    fn params(&self) -> Vec<f64> {
        self.weights.params()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        self.weights.set_params(p)
    }

    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    fn outputs(&self, seq: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(self.run_sequence(seq)?.into_iter().map(|s| s.y).collect())
    }

    fn loss_and_grad(&self, seq: &[Matrix], targets: &BatchTargets, kind: LossKind) -> Result<(f64, Vec<f64>)> {
        let (l, g) = self.backward(seq, targets, kind)?;
        Ok((l, g.params()))
    }
}
