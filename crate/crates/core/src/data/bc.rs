//! Behavioral-cloning stand-in: a fixed random teacher RNN maps Gaussian
//! observation sequences to action sequences.

use crate::data::{Sample, SequenceDataset, Target, TaskKind};
use crate::error::{config, Result};
use crate::rng::RngStream;
use crate::tensor::Matrix;

/// Default observation, action and length of the stand-in task.
pub const BC_INPUT_DIM: usize = 46;
pub const BC_OUTPUT_DIM: usize = 26;
pub const BC_LENGTH: usize = 200;

/// Dense tanh RNN: `h_t = tanh(W_x x_t + W_h h_{t-1})`, `y_t = W_y h_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Teacher {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub w_y: Matrix,
}

impl Teacher {
    /// Hidden width is twice the output width. Weights are drawn from
    /// N(0, (0.5 / sqrt(fan_in))^2).
    pub fn new(teacher_seed: u64, input_dim: usize, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return config("teacher dimensions must be >= 1");
        }
        let h = 2 * output_dim;
        let mut rng = RngStream::new(teacher_seed, 0);
        let top = 0.5 / ((input_dim + h) as f64).sqrt();
        Ok(Teacher {
            w_x: rng.normal_matrix(h, input_dim, 0.0, top)?,
            w_h: rng.normal_matrix(h, h, 0.0, top)?,
            w_y: rng.normal_matrix(output_dim, h, 0.0, 0.5 / (h as f64).sqrt())?,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.rows()
    }

    /// Runs one unbatched sequence.
    pub fn run(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hd = self.hidden_dim();
        let mut h = vec![0.0; hd];
        let mut out = Vec::with_capacity(inputs.len());
        for x in inputs {
            let next: Vec<f64> = (0..hd)
                .map(|i| {
                    let a: f64 = self.w_x.row(i).iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                        + self.w_h.row(i).iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
                    a.tanh()
                })
                .collect();
            h = next;
            out.push((0..self.w_y.rows()).map(|i| self.w_y.row(i).iter().zip(&h).map(|(w, v)| w * v).sum()).collect());
        }
        out
    }

    /// Largest absolute row sum of the readout, which bounds every output
    /// entry because hidden activations lie in [-1, 1].
    pub fn output_bound(&self) -> f64 {
        (0..self.w_y.rows())
            .map(|i| self.w_y.row(i).iter().map(|w| w.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Draws `count` sequences of `length` standard-normal observations and
/// labels them with the teacher fixed by `teacher_seed`.
pub fn bc_generate(
    teacher_seed: u64,
    input_dim: usize,
    output_dim: usize,
    count: usize,
    length: usize,
    rng: &mut RngStream,
) -> Result<SequenceDataset> {
    if length == 0 {
        return config("sequence length must be >= 1");
    }
    let teacher = Teacher::new(teacher_seed, input_dim, output_dim)?;
    let train = (0..count)
        .map(|_| {
            let frames: Vec<Vec<f64>> = (0..length).map(|_| (0..input_dim).map(|_| rng.normal()).collect()).collect();
            let target = Target::Sequence(teacher.run(&frames));
            Sample { frames, target }
        })
        .collect();
    Ok(SequenceDataset {
        task: TaskKind::Regression,
        input_dim,
        output_dim,
        seq_len: length,
        seed: rng.master_seed(),
        train,
        validation: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dims() {
        let d = bc_generate(1, BC_INPUT_DIM, BC_OUTPUT_DIM, 2, BC_LENGTH, &mut RngStream::new(2, 0)).unwrap();
        assert_eq!((d.input_dim, d.output_dim, d.seq_len), (46, 26, 200));
        let Target::Sequence(t) = &d.train[0].target else { panic!() };
        assert_eq!((t.len(), t[0].len()), (200, 26));
    }

    #[test]
    fn teacher_fixed_by_its_seed() {
        let a = bc_generate(5, 4, 3, 3, 6, &mut RngStream::new(10, 0)).unwrap();
        let b = bc_generate(5, 4, 3, 3, 6, &mut RngStream::new(11, 0)).unwrap();
        assert_ne!(a.train[0].frames, b.train[0].frames);
        let teacher = Teacher::new(5, 4, 3).unwrap();
        for s in a.train.iter().chain(&b.train) {
            assert_eq!(s.target, Target::Sequence(teacher.run(&s.frames)));
        }
    }

    #[test]
    fn outputs_bounded() {
        let teacher = Teacher::new(3, 6, 4).unwrap();
        let bound = teacher.output_bound();
        let d = bc_generate(3, 6, 4, 20, 30, &mut RngStream::new(4, 0)).unwrap();
        for s in &d.train {
            let Target::Sequence(t) = &s.target else { panic!() };
            assert!(t.iter().flatten().all(|v| v.abs() <= bound));
        }
    }
}
