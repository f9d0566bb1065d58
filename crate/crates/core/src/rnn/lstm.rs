//! Single-layer LSTM baseline with a linear readout.
//!
//! Gates are stacked `[input; forget; cell; output]` in a `4h`-row matrix.

use crate::error::{config, input, Error, Result};
use crate::rng::RngStream;
use crate::rnn::loss::{loss_with_grad, BatchTargets, LossKind};
use crate::rnn::SequenceModel;
use crate::tensor::{sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    /// `4h x |x|`
    pub w: Matrix,
    /// `4h x h`
    pub u: Matrix,
    pub b: Vec<f64>,
    /// `|y| x h`
    pub v: Matrix,
    pub c: Vec<f64>,
}

/// Parameter count `4(h|x| + h² + h) + |y|h + |y|`.
pub fn lstm_param_count(input_dim: usize, hidden_dim: usize, output_dim: usize) -> usize {
    let h = hidden_dim;
    4 * (h * input_dim + h * h + h) + output_dim * h + output_dim
}

/// Largest hidden size whose LSTM parameter count fits `budget`.
pub fn lstm_hidden_dim(budget: usize, input_dim: usize, output_dim: usize) -> Result<usize> {
    if lstm_param_count(input_dim, 1, output_dim) > budget {
        return config(format!("budget {budget} cannot hold an LSTM with hidden size 1"));
    }
    let mut h = 1;
    while lstm_param_count(input_dim, h + 1, output_dim) <= budget {
        h += 1;
    }
    Ok(h)
}

struct StepCache {
    i: Matrix,
    f: Matrix,
    g: Matrix,
    o: Matrix,
    c: Matrix,
    tanh_c: Matrix,
    h: Matrix,
}

impl Lstm {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Lstm {
            input_dim,
            hidden_dim,
            output_dim,
            w: Matrix::zeros(4 * hidden_dim, input_dim),
            u: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: vec![0.0; 4 * hidden_dim],
            v: Matrix::zeros(output_dim, hidden_dim),
            c: vec![0.0; output_dim],
        }
    }

    /// Gate weights ~ N(0, 1/(|x|+h)), readout ~ N(0, 1/h), zero biases.
    pub fn new(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &RngStream) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
            return config("LSTM dimensions must be >= 1");
        }
        let mut m = Lstm::zeros(input_dim, hidden_dim, output_dim);
        let mut s = rng.split(0);
        let gate_std = 1.0 / ((input_dim + hidden_dim) as f64).sqrt();
        m.w = s.normal_matrix(4 * hidden_dim, input_dim, 0.0, gate_std)?;
        m.u = s.normal_matrix(4 * hidden_dim, hidden_dim, 0.0, gate_std)?;
        m.v = s.normal_matrix(output_dim, hidden_dim, 0.0, 1.0 / (hidden_dim as f64).sqrt())?;
        Ok(m)
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn run(&self, seq: &[Matrix]) -> Result<(Vec<StepCache>, Vec<Matrix>)> {
        let Some(first) = seq.first() else {
            return input("sequence must be non-empty");
        };
        let (h, n) = (self.hidden_dim, first.cols());
        let mut h_prev = Matrix::zeros(h, n);
        let mut c_prev = Matrix::zeros(h, n);
        let mut caches = Vec::with_capacity(seq.len());
        let mut outputs = Vec::with_capacity(seq.len());
        for x in seq {
            if x.rows() != self.input_dim {
                return Err(Error::Shape {
                    op: "lstm step",
                    left_rows: x.rows(),
                    left_cols: x.cols(),
                    right_rows: self.input_dim,
                    right_cols: n,
                });
            }
            let mut z = self.w.matmul(x)?;
            z.add_assign(&self.u.matmul(&h_prev)?)?;
            z.add_row_bias(&self.b)?;
            let gate = |k: usize, f: fn(f64) -> f64| {
                let mut m = Matrix::zeros(h, n);
                for r in 0..h {
                    for (o, &v) in m.row_mut(r).iter_mut().zip(z.row(k * h + r)) {
                        *o = f(v);
                    }
                }
                m
            };
            let i = gate(0, sigmoid);
            let f = gate(1, sigmoid);
            let g = gate(2, f64::tanh);
            let o = gate(3, sigmoid);
            let mut c = Matrix::zeros(h, n);
            for idx in 0..h * n {
                c.as_mut_slice()[idx] = f.as_slice()[idx] * c_prev.as_slice()[idx] + i.as_slice()[idx] * g.as_slice()[idx];
            }
            let tanh_c = c.map(f64::tanh);
            let mut hn = Matrix::zeros(h, n);
            for idx in 0..h * n {
                hn.as_mut_slice()[idx] = o.as_slice()[idx] * tanh_c.as_slice()[idx];
            }
            let mut y = self.v.matmul(&hn)?;
            y.add_row_bias(&self.c)?;
            outputs.push(y);
            h_prev = hn.clone();
            c_prev = c.clone();
            caches.push(StepCache { i, f, g, o, c, tanh_c, h: hn });
        }
        Ok((caches, outputs))
    }

    pub fn backward(&self, seq: &[Matrix], targets: &BatchTargets, kind: LossKind) -> Result<(f64, Lstm)> {
        let (caches, outputs) = self.run(seq)?;
        if outputs.iter().any(|m| !m.is_finite()) {
            return Err(Error::Diverged("non-finite LSTM output".into()));
        }
        let (loss, direct) = loss_with_grad(&outputs, targets, kind)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("loss is {loss}")));
        }
        let (h, n) = (self.hidden_dim, seq[0].cols());
        let mut grad = Lstm::zeros(self.input_dim, h, self.output_dim);
        let mut dh_next = Matrix::zeros(h, n);
        let mut dc_next = Matrix::zeros(h, n);
        let zeros = Matrix::zeros(h, n);
        let vt = self.v.transpose();
        let ut = self.u.transpose();
        for t in (0..seq.len()).rev() {
            let cache = &caches[t];
            let (h_prev, c_prev) = if t == 0 { (&zeros, &zeros) } else { (&caches[t - 1].h, &caches[t - 1].c) };
            let dy = &direct[t];
            grad.v.add_assign(&dy.matmul(&cache.h.transpose())?)?;
            for (r, cb) in grad.c.iter_mut().enumerate() {
                *cb += dy.row(r).iter().sum::<f64>();
            }
            let mut dh = vt.matmul(dy)?;
            dh.add_assign(&dh_next)?;
            let mut dz = Matrix::zeros(4 * h, n);
            let mut dc_prev = Matrix::zeros(h, n);
            for r in 0..h {
                for j in 0..n {
                    let k = r * n + j;
                    let (i, f, g, o) = (cache.i.as_slice()[k], cache.f.as_slice()[k], cache.g.as_slice()[k], cache.o.as_slice()[k]);
                    let tc = cache.tanh_c.as_slice()[k];
                    let dhv = dh.as_slice()[k];
                    let dc = dhv * o * (1.0 - tc * tc) + dc_next.as_slice()[k];
                    dz.set(r, j, dc * g * i * (1.0 - i));
                    dz.set(h + r, j, dc * c_prev.as_slice()[k] * f * (1.0 - f));
                    dz.set(2 * h + r, j, dc * i * (1.0 - g * g));
                    dz.set(3 * h + r, j, dhv * tc * o * (1.0 - o));
                    dc_prev.as_mut_slice()[k] = dc * f;
                }
            }
            grad.w.add_assign(&dz.matmul(&seq[t].transpose())?)?;
            grad.u.add_assign(&dz.matmul(&h_prev.transpose())?)?;
            for (r, bb) in grad.b.iter_mut().enumerate() {
                *bb += dz.row(r).iter().sum::<f64>();
            }
            dh_next = ut.matmul(&dz)?;
            dc_next = dc_prev;
        }
        Ok((loss, grad))
    }
}

impl SequenceModel for Lstm {
    fn param_len(&self) -> usize {
        lstm_param_count(self.input_dim, self.hidden_dim, self.output_dim)
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_len());
        p.extend_from_slice(self.w.as_slice());
        p.extend_from_slice(self.u.as_slice());
        p.extend_from_slice(&self.b);
        p.extend_from_slice(self.v.as_slice());
        p.extend_from_slice(&self.c);
        p
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_len() {
            return input(format!("expected {} LSTM parameters, got {}", self.param_len(), p.len()));
        }
        let mut off = 0;
        for dst in [
            self.w.as_mut_slice(),
            self.u.as_mut_slice(),
            &mut self.b[..],
            self.v.as_mut_slice(),
            &mut self.c[..],
        ] {
            dst.copy_from_slice(&p[off..off + dst.len()]);
            off += dst.len();
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn outputs(&self, seq: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(self.run(seq)?.1)
    }

    fn loss_and_grad(&self, seq: &[Matrix], targets: &BatchTargets, kind: LossKind) -> Result<(f64, Vec<f64>)> {
        let (l, g) = self.backward(seq, targets, kind)?;
        Ok((l, g.params()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_size_search() {
        let h = lstm_hidden_dim(100_000, 2500, 10).unwrap();
        assert!(lstm_param_count(2500, h, 10) <= 100_000);
        assert!(lstm_param_count(2500, h + 1, 10) > 100_000);
        assert_eq!(h, 9);
        assert!(lstm_hidden_dim(10, 2500, 10).is_err());
    }

    #[test]
    fn scalar_hand_trace() {
        // h=1, |x|=1, |y|=1, zero weights except the cell-candidate bias and
        // the readout, so the cell state actually evolves.
        let mut m = Lstm::zeros(1, 1, 1);
        m.b[2] = 0.5;
        m.v.set(0, 0, 2.0);
        let seq = vec![Matrix::filled(1, 1, 1.0), Matrix::filled(1, 1, -1.0)];
        let ys = m.outputs(&seq).unwrap();
        let g = 0.5f64.tanh();
        let c1 = 0.5 * g;
        let h1 = 0.5 * c1.tanh();
        let c2 = 0.5 * c1 + 0.5 * g;
        let h2 = 0.5 * c2.tanh();
        assert!((ys[0].get(0, 0) - 2.0 * h1).abs() < 1e-15);
        assert!((ys[1].get(0, 0) - 2.0 * h2).abs() < 1e-15);

        let z = Lstm::zeros(1, 1, 1);
        let ys = z.outputs(&seq).unwrap();
        assert!(ys.iter().all(|y| y.get(0, 0) == 0.0));
    }
}
