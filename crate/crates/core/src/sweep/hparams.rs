//! Sampling of the 19 sweep hyperparameters.

use serde::{Deserialize, Serialize};

use crate::block::{BlockConfig, BlockId};
use crate::error::{config, Result};
use crate::rng::RngStream;

/// Closed interval, sampled uniformly or log-uniformly. A point interval
/// always yields its single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
}

impl Range {
    pub const fn uniform(lo: f64, hi: f64) -> Self {
        Range { lo, hi, log: false }
    }

    pub const fn log_uniform(lo: f64, hi: f64) -> Self {
        Range { lo, hi, log: true }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return config(format!("{name} range [{}, {}] is empty or not finite", self.lo, self.hi));
        }
        if self.log && self.lo <= 0.0 {
            return config(format!("{name} log range needs lo > 0, got {}", self.lo));
        }
        Ok(())
    }

    /// One draw. Consumes a single uniform even for point intervals so that
    /// narrowing one range does not shift the others.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform();
        if self.lo == self.hi {
            return self.lo;
        }
        if self.log {
            let (a, b) = (self.lo.ln(), self.hi.ln());
            (a + u * (b - a)).exp().clamp(self.lo, self.hi)
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub mean: Range,
    pub std: Range,
    pub sparsity: Range,
    pub learning_rate: Range,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            mean: Range::uniform(-0.1, 0.1),
            std: Range::log_uniform(0.01, 1.0),
            sparsity: Range::uniform(0.01, 1.0),
            learning_rate: Range::log_uniform(1e-4, 1e-2),
        }
    }
}

impl SamplingRanges {
    pub fn validate(&self) -> Result<()> {
        self.mean.validate("mean")?;
        self.std.validate("std")?;
        self.sparsity.validate("sparsity")?;
        self.learning_rate.validate("learning rate")?;
        if self.std.lo < 0.0 {
            return config("std range must be >= 0");
        }
        if self.sparsity.lo < 0.0 || self.sparsity.hi > 1.0 {
            return config("sparsity range must lie in [0, 1]");
        }
        if self.learning_rate.lo <= 0.0 {
            return config("learning rate range must be > 0");
        }
        Ok(())
    }
}

/// Per-block mean, std and sparsity plus the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HParams {
    pub blocks: [BlockConfig; 6],
    pub learning_rate: f64,
}

/// Draws block by block in `BlockId::ALL` order (mean, std, sparsity),
/// then the learning rate.
pub fn sample_hparams(rng: &mut RngStream, ranges: &SamplingRanges) -> Result<HParams> {
    ranges.validate()?;
    let mut blocks = [BlockConfig::new(0.0, 0.0, 0.0); 6];
    for id in BlockId::ALL {
        let mean = ranges.mean.sample(rng);
        let std = ranges.std.sample(rng);
        let sparsity = ranges.sparsity.sample(rng);
        blocks[id.index()] = BlockConfig::new(mean, std, sparsity);
    }
    Ok(HParams { blocks, learning_rate: ranges.learning_rate.sample(rng) })
}
