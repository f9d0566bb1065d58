//! Seeded, splittable random streams.
//!
//! A stream is identified by `(master_seed, stream_id)`. The pair selects a
//! ChaCha8 key and stream, so equal pairs replay identical draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, Result};
use crate::tensor::{Mask, Matrix};

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        RngStream {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derives an independent child stream. The child depends only on this
    /// stream's identity and `child_id`, never on how many draws were made.
    pub fn split(&self, child_id: u64) -> RngStream {
        let derived = splitmix64(self.master_seed ^ splitmix64(self.stream_id.wrapping_add(0xA076_1D64_78BD_642F)));
        RngStream::new(derived, child_id)
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }

    /// Uniform integer in [0, n). Panics if n is zero.
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize, mean: f64, std: f64) -> Result<Matrix> {
        sample_normal(self, rows, cols, mean, std)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// I.i.d. Normal(mean, std^2) entries; `std == 0` yields the constant `mean`.
pub fn sample_normal(rng: &mut RngStream, rows: usize, cols: usize, mean: f64, std: f64) -> Result<Matrix> {
    if !(std >= 0.0) || !std.is_finite() || !mean.is_finite() {
        return config(format!("normal sampling needs finite mean and std >= 0, got mean={mean} std={std}"));
    }
    if std == 0.0 {
        return Ok(Matrix::filled(rows, cols, mean));
    }
    let data = (0..rows * cols).map(|_| mean + std * rng.normal()).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Independent Bernoulli(p) entries. The endpoints are exact: `p == 1` gives
/// an all-true mask and `p == 0` an all-false mask without consuming draws.
pub fn sample_bernoulli_mask(rng: &mut RngStream, rows: usize, cols: usize, p: f64) -> Result<Mask> {
    if !(0.0..=1.0).contains(&p) {
        return config(format!("mask probability must lie in [0, 1], got {p}"));
    }
    if p == 1.0 || p == 0.0 {
        return Ok(Mask::full(rows, cols, p == 1.0));
    }
    let bits = (0..rows * cols).map(|_| rng.uniform() < p).collect();
    Mask::from_bits(rows, cols, bits)
}
