//! The six-block weight space of the generalized block RNN.
//!
//! The hidden row maps `[x; h; y]` to the next hidden state through the
//! `Hx`, `Hh` and `Hy` blocks; the output row maps the same concatenated
//! input to the next output through `Yx`, `Yh` and `Yy`. Each block carries
//! its own initialization mean/std and a sparsity (the fraction of
//! trainable entries).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::{sample_bernoulli_mask, RngStream};
use crate::tensor::{Activation, Mask, Matrix};

/// One of the three stacked signals feeding the recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Input,
    Hidden,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockId {
    Hx,
    Hh,
    Hy,
    Yx,
    Yh,
    Yy,
}

impl BlockId {
    pub const ALL: [BlockId; 6] = [BlockId::Hx, BlockId::Hh, BlockId::Hy, BlockId::Yx, BlockId::Yh, BlockId::Yy];
    pub const TOP_ROW: [BlockId; 3] = [BlockId::Hx, BlockId::Hh, BlockId::Hy];
    pub const BOTTOM_ROW: [BlockId; 3] = [BlockId::Yx, BlockId::Yh, BlockId::Yy];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// The signal this block writes to.
    pub fn row(self) -> Dim {
        match self {
            BlockId::Hx | BlockId::Hh | BlockId::Hy => Dim::Hidden,
            BlockId::Yx | BlockId::Yh | BlockId::Yy => Dim::Output,
        }
    }

    /// The signal this block reads from.
    pub fn col(self) -> Dim {
        match self {
            BlockId::Hx | BlockId::Yx => Dim::Input,
            BlockId::Hh | BlockId::Yh => Dim::Hidden,
            BlockId::Hy | BlockId::Yy => Dim::Output,
        }
    }

    pub fn is_top_row(self) -> bool {
        self.row() == Dim::Hidden
    }

    pub fn key(self) -> &'static str {
        match self {
            BlockId::Hx => "hx",
            BlockId::Hh => "hh",
            BlockId::Hy => "hy",
            BlockId::Yx => "yx",
            BlockId::Yh => "yh",
            BlockId::Yy => "yy",
        }
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key().to_uppercase())
    }
}

impl FromStr for BlockId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BlockId::ALL
            .into_iter()
            .find(|b| b.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown block '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub mean: f64,
    pub std: f64,
    pub sparsity: f64,
}

impl BlockConfig {
    pub fn new(mean: f64, std: f64, sparsity: f64) -> Self {
        BlockConfig { mean, std, sparsity }
    }

    pub fn validate(&self, id: BlockId) -> Result<()> {
        if !self.mean.is_finite() {
            return config(format!("block {id}: mean must be finite"));
        }
        if !(self.std >= 0.0) || !self.std.is_finite() {
            return config(format!("block {id}: std must be finite and >= 0, got {}", self.std));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return config(format!("block {id}: sparsity must lie in [0, 1], got {}", self.sparsity));
        }
        Ok(())
    }
}

/// Dimensions plus per-block hyperparameters of a block RNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub blocks: [BlockConfig; 6],
    pub activation: Activation,
    pub learning_rate: f64,
}

impl BlockSpec {
    /// All blocks share `sparsity`; weights are zero-mean with unit std.
    pub fn uniform(input_dim: usize, hidden_dim: usize, output_dim: usize, sparsity: f64) -> Self {
        BlockSpec {
            input_dim,
            hidden_dim,
            output_dim,
            blocks: [BlockConfig::new(0.0, 1.0, sparsity); 6],
            activation: Activation::Tanh,
            learning_rate: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return config(format!(
                "dimensions must be >= 1, got x={} h={} y={}",
                self.input_dim, self.hidden_dim, self.output_dim
            ));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return config(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        for id in BlockId::ALL {
            self.block(id).validate(id)?;
        }
        Ok(())
    }

    #[inline]
    pub fn block(&self, id: BlockId) -> &BlockConfig {
        &self.blocks[id.index()]
    }

    #[inline]
    pub fn block_mut(&mut self, id: BlockId) -> &mut BlockConfig {
        &mut self.blocks[id.index()]
    }

    pub fn dim(&self, d: Dim) -> usize {
        match d {
            Dim::Input => self.input_dim,
            Dim::Hidden => self.hidden_dim,
            Dim::Output => self.output_dim,
        }
    }

    /// `(rows, cols)` of a block: output signal by input signal.
    pub fn block_shape(&self, id: BlockId) -> (usize, usize) {
        (self.dim(id.row()), self.dim(id.col()))
    }

    pub fn sparsities(&self) -> [f64; 6] {
        self.blocks.map(|b| b.sparsity)
    }

    pub fn with_hidden_dim(&self, hidden_dim: usize) -> BlockSpec {
        BlockSpec {
            hidden_dim,
            ..self.clone()
        }
    }
}

/// Expected trainable parameter counts, `rows * cols * sparsity` per block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalCounts {
    pub per_block: [f64; 6],
    pub bias: usize,
    pub total: f64,
}

impl NominalCounts {
    pub fn block(&self, id: BlockId) -> f64 {
        self.per_block[id.index()]
    }

    /// `Hh / (Hx + Hh + Hy)` over expected counts; `None` for an empty top row.
    pub fn hidden_proportion(&self) -> Option<f64> {
        let top: f64 = BlockId::TOP_ROW.iter().map(|&b| self.block(b)).sum();
        (top > 0.0).then(|| self.block(BlockId::Hh) / top)
    }
}

pub fn nominal_param_count(spec: &BlockSpec) -> NominalCounts {
    let per_block = BlockId::ALL.map(|id| {
        let (r, c) = spec.block_shape(id);
        (r * c) as f64 * spec.block(id).sparsity
    });
    let bias = spec.hidden_dim + spec.output_dim;
    let total = per_block.iter().sum::<f64>() + bias as f64;
    NominalCounts { per_block, bias, total }
}

/// A weight block whose untrainable entries are pinned at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    values: Matrix,
    mask: Mask,
    // Row-major flat indices of the trainable entries.
    active: Vec<usize>,
}

impl MaskedMatrix {
    /// Combines values and mask, zeroing every masked-off entry.
    pub fn new(mut values: Matrix, mask: Mask) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::Shape {
                op: "MaskedMatrix::new",
                left_rows: values.rows(),
                left_cols: values.cols(),
                right_rows: mask.rows(),
                right_cols: mask.cols(),
            });
        }
        let mut active = Vec::with_capacity(mask.count_true());
        for (i, (v, &m)) in values.as_mut_slice().iter_mut().zip(mask.bits()).enumerate() {
            if m {
                active.push(i);
            } else {
                *v = 0.0;
            }
        }
        Ok(MaskedMatrix { values, mask, active })
    }

    pub fn dense(values: Matrix) -> Self {
        let (r, c) = values.shape();
        MaskedMatrix::new(values, Mask::full(r, c, true)).expect("shapes agree")
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn trainable_count(&self) -> usize {
        self.active.len()
    }

    pub fn capacity(&self) -> usize {
        self.values.rows() * self.values.cols()
    }

    /// Same mask, all values zero.
    pub fn zeros_like(&self) -> Self {
        let (r, c) = self.shape();
        MaskedMatrix {
            values: Matrix::zeros(r, c),
            mask: self.mask.clone(),
            active: self.active.clone(),
        }
    }

    /// Value at the `k`-th trainable position.
    #[inline]
    pub fn active_value(&self, k: usize) -> f64 {
        self.values.as_slice()[self.active[k]]
    }

    #[inline]
    pub fn set_active_value(&mut self, k: usize, v: f64) {
        let idx = self.active[k];
        self.values.as_mut_slice()[idx] = v;
    }

    /// `out += W · x`, visiting trainable entries only. Every output entry
    /// accumulates its terms in increasing inner index.
    pub fn accumulate_product(&self, x: &Matrix, out: &mut Matrix) {
        let cols = self.values.cols();
        let w = self.values.as_slice();
        debug_assert_eq!(x.rows(), cols);
        debug_assert_eq!(out.rows(), self.values.rows());
        for &idx in &self.active {
            let (i, k) = (idx / cols, idx % cols);
            let a = w[idx];
            let xr = x.row(k);
            for (o, &b) in out.row_mut(i).iter_mut().zip(xr) {
                *o += a * b;
            }
        }
    }

    /// `out += Wᵀ · g`, visiting trainable entries only.
    pub fn accumulate_transpose_product(&self, g: &Matrix, out: &mut Matrix) {
        let cols = self.values.cols();
        let w = self.values.as_slice();
        for &idx in &self.active {
            let (i, k) = (idx / cols, idx % cols);
            let a = w[idx];
            let gr = g.row(i);
            for (o, &b) in out.row_mut(k).iter_mut().zip(gr) {
                *o += a * b;
            }
        }
    }

    /// `self += (g · xᵀ) ∘ mask`, the weight gradient of `W · x`.
    pub fn accumulate_outer(&mut self, g: &Matrix, x: &Matrix) {
        let cols = self.values.cols();
        let vals = self.values.as_mut_slice();
        for &idx in &self.active {
            let (i, k) = (idx / cols, idx % cols);
            let dot: f64 = g.row(i).iter().zip(x.row(k)).map(|(a, b)| a * b).sum();
            vals[idx] += dot;
        }
    }
}

/// Six masked weight blocks plus one dense bias vector per output row.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpace {
    pub blocks: [MaskedMatrix; 6],
    pub bias_h: Vec<f64>,
    pub bias_y: Vec<f64>,
}

impl WeightSpace {
    #[inline]
    pub fn block(&self, id: BlockId) -> &MaskedMatrix {
        &self.blocks[id.index()]
    }

    #[inline]
    pub fn block_mut(&mut self, id: BlockId) -> &mut MaskedMatrix {
        &mut self.blocks[id.index()]
    }

    pub fn input_dim(&self) -> usize {
        self.block(BlockId::Hx).shape().1
    }

    pub fn hidden_dim(&self) -> usize {
        self.bias_h.len()
    }

    pub fn output_dim(&self) -> usize {
        self.bias_y.len()
    }

    pub fn zeros_like(&self) -> WeightSpace {
        WeightSpace {
            blocks: self.blocks.clone().map(|b| b.zeros_like()),
            bias_h: vec![0.0; self.bias_h.len()],
            bias_y: vec![0.0; self.bias_y.len()],
        }
    }

    /// Number of trainable scalars: active block entries plus both biases.
    pub fn trainable_len(&self) -> usize {
        self.blocks.iter().map(MaskedMatrix::trainable_count).sum::<usize>() + self.bias_h.len() + self.bias_y.len()
    }

    /// Trainable scalars in canonical order: blocks in `BlockId::ALL` order
    /// (row-major over active entries), then `bias_h`, then `bias_y`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trainable_len());
        for b in &self.blocks {
            out.extend((0..b.trainable_count()).map(|k| b.active_value(k)));
        }
        out.extend_from_slice(&self.bias_h);
        out.extend_from_slice(&self.bias_y);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.trainable_len() {
            return Err(Error::Input(format!(
                "expected {} parameters, got {}",
                self.trainable_len(),
                p.len()
            )));
        }
        let mut it = p.iter().copied();
        for b in &mut self.blocks {
            for k in 0..b.trainable_count() {
                b.set_active_value(k, it.next().unwrap());
            }
        }
        for v in self.bias_h.iter_mut().chain(self.bias_y.iter_mut()) {
            *v = it.next().unwrap();
        }
        Ok(())
    }

    /// True when every masked-off entry of every block is exactly zero.
    pub fn masks_respected(&self) -> bool {
        self.blocks.iter().all(|b| {
            b.values()
                .as_slice()
                .iter()
                .zip(b.mask().bits())
                .all(|(v, &m)| m || v.to_bits() == 0)
        })
    }
}

/// Samples masks and values for every block. Biases start at zero.
pub fn instantiate(spec: &BlockSpec, rng: &RngStream) -> Result<WeightSpace> {
    spec.validate()?;
    let blocks = BlockId::ALL.map(|id| -> Result<MaskedMatrix> {
        let cfg = spec.block(id);
        let (rows, cols) = spec.block_shape(id);
        let mut stream = rng.split(id.index() as u64);
        let mask = sample_bernoulli_mask(&mut stream, rows, cols, cfg.sparsity)?;
        let mut values = Matrix::zeros(rows, cols);
        for (v, &m) in values.as_mut_slice().iter_mut().zip(mask.bits()) {
            if m && cfg.std > 0.0 {
                *v = cfg.mean + cfg.std * stream.normal();
            } else if m {
                *v = cfg.mean;
            }
        }
        MaskedMatrix::new(values, mask)
    });
    let [hx, hh, hy, yx, yh, yy] = blocks;
    Ok(WeightSpace {
        blocks: [hx?, hh?, hy?, yx?, yh?, yy?],
        bias_h: vec![0.0; spec.hidden_dim],
        bias_y: vec![0.0; spec.output_dim],
    })
}

/// Realized parameter counts of an instantiated weight space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub per_block: [usize; 6],
    pub capacity: [usize; 6],
    pub bias: usize,
    pub total: usize,
    /// `None` when the hidden row has no trainable weights at all.
    pub hidden_proportion: Option<f64>,
    pub model_sparsity: f64,
}

impl CountReport {
    pub fn block(&self, id: BlockId) -> usize {
        self.per_block[id.index()]
    }

    pub fn hidden_proportion(&self) -> Result<f64> {
        self.hidden_proportion
            .ok_or_else(|| Error::Input("hidden proportion undefined: the hidden row has no trainable weights".into()))
    }
}

pub fn count_report(ws: &WeightSpace) -> CountReport {
    let per_block = ws.blocks.each_ref().map(MaskedMatrix::trainable_count);
    let capacity = ws.blocks.each_ref().map(MaskedMatrix::capacity);
    count_report_from_counts(per_block, capacity, ws.bias_h.len() + ws.bias_y.len())
}

/// Builds a report from raw block counts; used by the realized and
/// mask-only recomputation paths alike.
pub fn count_report_from_counts(per_block: [usize; 6], capacity: [usize; 6], bias: usize) -> CountReport {
    let weights: usize = per_block.iter().sum();
    let top: usize = BlockId::TOP_ROW.iter().map(|b| per_block[b.index()]).sum();
    let hidden_proportion = (top > 0).then(|| per_block[BlockId::Hh.index()] as f64 / top as f64);
    let cap: usize = capacity.iter().sum();
    CountReport {
        per_block,
        capacity,
        bias,
        total: weights + bias,
        hidden_proportion,
        model_sparsity: if cap == 0 { 0.0 } else { weights as f64 / cap as f64 },
    }
}

/// Named sparsity layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// Every block fully dense.
    Dense,
    /// Every block 20% trainable.
    Uniform20,
    /// Dense input-to-hidden and output-row x/h blocks, 20% elsewhere.
    AhVaried,
    /// The inverse of `AhVaried`: sparse input-facing blocks, dense recurrence.
    RadVaried,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Dense, Preset::Uniform20, Preset::AhVaried, Preset::RadVaried];

    /// Sparsities in `BlockId::ALL` order.
    pub fn sparsities(self) -> [f64; 6] {
        match self {
            Preset::Dense => [1.0; 6],
            Preset::Uniform20 => [0.2; 6],
            Preset::AhVaried => [1.0, 0.2, 0.2, 1.0, 1.0, 0.2],
            Preset::RadVaried => [0.2, 1.0, 1.0, 0.2, 0.2, 1.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Dense => "dense",
            Preset::Uniform20 => "uniform20",
            Preset::AhVaried => "ah_varied",
            Preset::RadVaried => "rad_varied",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}' (expected dense, uniform20, ah_varied or rad_varied)")))
    }
}

/// Largest hidden dimension whose nominal total stays within `budget`.
///
/// The nominal total grows strictly with the hidden dimension (the hidden
/// bias alone adds one per unit), so a doubling search followed by
/// bisection finds the boundary.
pub fn max_hidden_dim(template: &BlockSpec, budget: usize) -> Result<usize> {
    let fits = |h: usize| nominal_param_count(&template.with_hidden_dim(h)).total <= budget as f64;
    if !fits(1) {
        let need = nominal_param_count(&template.with_hidden_dim(1)).total;
        return config(format!("budget {budget} is infeasible: even hidden_dim=1 needs {need} parameters"));
    }
    let mut lo = 1;
    let mut hi = 2;
    while fits(hi) {
        lo = hi;
        hi *= 2;
        if hi > 1 << 30 {
            return config("budget too large for hidden-dimension search");
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Sets each block's std to `1/sqrt(expected fan-in)` of its output row.
pub fn fan_in_init(spec: &mut BlockSpec) {
    for row in [BlockId::TOP_ROW, BlockId::BOTTOM_ROW] {
        let fan_in: f64 = row
            .iter()
            .map(|&b| spec.dim(b.col()) as f64 * spec.block(b).sparsity)
            .sum();
        let std = if fan_in > 0.0 { 1.0 / fan_in.sqrt() } else { 0.0 };
        for &b in &row {
            let cfg = spec.block_mut(b);
            cfg.mean = 0.0;
            cfg.std = std;
        }
    }
}

/// A named layout sized to the largest hidden dimension within `budget`,
/// with fan-in scaled initialization.
pub fn preset(name: Preset, input_dim: usize, output_dim: usize, budget: usize) -> Result<BlockSpec> {
    let mut spec = BlockSpec::uniform(input_dim, 1, output_dim, 1.0);
    for (cfg, s) in spec.blocks.iter_mut().zip(name.sparsities()) {
        cfg.sparsity = s;
    }
    spec.validate()?;
    spec.hidden_dim = max_hidden_dim(&spec, budget)?;
    fan_in_init(&mut spec);
    Ok(spec)
}
