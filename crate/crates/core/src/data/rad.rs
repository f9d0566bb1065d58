//! Random anomaly detection sequences.
//!
//! Each sequence holds `n` different images of one class. All but one frame
//! receive the same transform combination; the remaining frame, at a uniform
//! random position, receives a different one. The target is that position.
//! The output layer has `n + 1` units; class `n` is never a target.

use std::fmt;

use crate::data::{ImageSet, Sample, SequenceDataset, Target, TaskKind};
use crate::error::{config, input, Error, Result};
use crate::rng::RngStream;

/// Side of the square canvas source images are centred on before transforms.
pub const RAD_CANVAS: usize = 50;
/// Number of procedural glyph classes in the self-contained variant.
pub const LITE_CLASSES: usize = 10;
const SHIFT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    Identity,
    Rotate90,
    Rotate180,
    Rotate270,
    FlipHorizontal,
    FlipVertical,
    InvertIntensity,
    /// Three pixels to the right, zero fill.
    ShiftRight,
    /// Three pixels down, zero fill.
    ShiftDown,
}

impl Transform {
    pub const ALL: [Transform; 9] = [
        Transform::Identity,
        Transform::Rotate90,
        Transform::Rotate180,
        Transform::Rotate270,
        Transform::FlipHorizontal,
        Transform::FlipVertical,
        Transform::InvertIntensity,
        Transform::ShiftRight,
        Transform::ShiftDown,
    ];

    /// Applies the transform to a row-major `side x side` image with values in [0, 1].
    pub fn apply(self, img: &[f64], side: usize) -> Vec<f64> {
        let at = |r: usize, c: usize| img[r * side + c];
        let last = side - 1;
        let mut out = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                out[r * side + c] = match self {
                    Transform::Identity => at(r, c),
                    // clockwise quarter turn
                    Transform::Rotate90 => at(last - c, r),
                    Transform::Rotate180 => at(last - r, last - c),
                    Transform::Rotate270 => at(c, last - r),
                    Transform::FlipHorizontal => at(r, last - c),
                    Transform::FlipVertical => at(last - r, c),
                    Transform::InvertIntensity => 1.0 - at(r, c),
                    Transform::ShiftRight => {
                        if c >= SHIFT {
                            at(r, c - SHIFT)
                        } else {
                            0.0
                        }
                    }
                    Transform::ShiftDown => {
                        if r >= SHIFT {
                            at(r - SHIFT, c)
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
        out
    }
}

/// An ordered pair of distinct catalog transforms, applied first then second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Combo {
    pub first: Transform,
    pub second: Transform,
}

impl Combo {
    pub fn new(first: Transform, second: Transform) -> Result<Self> {
        if first == second {
            return config(format!("combo repeats {first:?}"));
        }
        Ok(Combo { first, second })
    }

    /// All 72 combos in catalog order.
    pub fn all() -> Vec<Combo> {
        let mut v = Vec::with_capacity(72);
        for a in Transform::ALL {
            for b in Transform::ALL {
                if a != b {
                    v.push(Combo { first: a, second: b });
                }
            }
        }
        v
    }

    /// Position in `Combo::all()`.
    pub fn id(self) -> usize {
        let ia = Transform::ALL.iter().position(|&t| t == self.first).unwrap();
        let ib = Transform::ALL.iter().position(|&t| t == self.second).unwrap();
        ia * 8 + if ib > ia { ib - 1 } else { ib }
    }

    pub fn apply(self, img: &[f64], side: usize) -> Vec<f64> {
        self.second.apply(&self.first.apply(img, side), side)
    }

    /// Whether two combos act identically on every `side x side` image,
    /// decided on a probe whose pixels are all distinct and lie strictly
    /// inside (0, 1).
    pub fn same_effect(self, other: Combo, side: usize) -> bool {
        let n = side * side;
        let probe: Vec<f64> = (0..n).map(|i| (i + 1) as f64 / (n + 1) as f64).collect();
        self.apply(&probe, side) == other.apply(&probe, side)
    }
}

impl fmt::Display for Combo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}+{:?}", self.first, self.second)
    }
}

/// Applies `base` to every frame except `anomaly_index`, which gets `anomaly`.
pub fn compose_sequence(
    images: &[Vec<f64>],
    side: usize,
    base: Combo,
    anomaly: Combo,
    anomaly_index: usize,
) -> Result<Vec<Vec<f64>>> {
    if base == anomaly || base.same_effect(anomaly, side) {
        return input(format!("anomaly combo {anomaly} must differ from base combo {base}"));
    }
    if anomaly_index >= images.len() {
        return input(format!("anomaly index {anomaly_index} outside a sequence of {}", images.len()));
    }
    Ok(images
        .iter()
        .enumerate()
        .map(|(i, img)| if i == anomaly_index { anomaly.apply(img, side) } else { base.apply(img, side) })
        .collect())
}

/// Groups combos by their action on `side x side` images: entry `i` is the
/// smallest combo id with the same effect as combo `i`.
pub fn effect_classes(side: usize) -> Vec<usize> {
    let catalog = Combo::all();
    let n = side * side;
    let probe: Vec<f64> = (0..n).map(|i| (i + 1) as f64 / (n + 1) as f64).collect();
    let images: Vec<Vec<f64>> = catalog.iter().map(|c| c.apply(&probe, side)).collect();
    (0..catalog.len())
        .map(|i| (0..=i).find(|&j| images[j] == images[i]).unwrap())
        .collect()
}

fn pick_combos(rng: &mut RngStream, catalog: &[Combo], classes: &[usize]) -> (Combo, Combo) {
    let b = rng.below(catalog.len() as u64) as usize;
    let others: Vec<usize> = (0..catalog.len()).filter(|&i| classes[i] != classes[b]).collect();
    let a = others[rng.below(others.len() as u64) as usize];
    (catalog[b], catalog[a])
}

/// Draws `k` distinct entries of `pool` (partial Fisher-Yates).
fn choose_distinct<T: Copy>(rng: &mut RngStream, pool: &[T], k: usize) -> Vec<T> {
    let mut p = pool.to_vec();
    for i in 0..k {
        let j = i + rng.below((p.len() - i) as u64) as usize;
        p.swap(i, j);
    }
    p.truncate(k);
    p
}

/// One generated sequence before flattening into a [`Sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadSequence {
    pub frames: Vec<Vec<f64>>,
    pub anomaly_index: usize,
    pub base: Combo,
    pub anomaly: Combo,
}

impl From<RadSequence> for Sample {
    fn from(s: RadSequence) -> Sample {
        Sample {
            frames: s.frames,
            target: Target::Class(s.anomaly_index),
        }
    }
}

fn draw_sequence(
    rng: &mut RngStream,
    frames: Vec<Vec<f64>>,
    side: usize,
    catalog: &[Combo],
    classes: &[usize],
) -> Result<RadSequence> {
    let (base, anomaly) = pick_combos(rng, catalog, classes);
    let anomaly_index = rng.below(frames.len() as u64) as usize;
    Ok(RadSequence {
        frames: compose_sequence(&frames, side, base, anomaly, anomaly_index)?,
        anomaly_index,
        base,
        anomaly,
    })
}

fn sequence_dataset(seqs: Vec<RadSequence>, side: usize, n: usize, seed: u64) -> SequenceDataset {
    SequenceDataset {
        task: TaskKind::Classification,
        input_dim: side * side,
        output_dim: n + 1,
        seq_len: n,
        seed,
        train: seqs.into_iter().map(Sample::from).collect(),
        validation: Vec::new(),
    }
}

/// Builds `count` anomaly sequences of length `n` from labeled images. Each
/// image is centred on a 50x50 canvas and scaled to [0, 1] before transforms.
pub fn rad_sequences(imgs: &ImageSet, count: usize, n: usize, rng: &mut RngStream) -> Result<Vec<RadSequence>> {
    if n < 2 {
        return config("sequence length n must be >= 2");
    }
    if imgs.is_empty() {
        return input("image set is empty");
    }
    if imgs.rows > RAD_CANVAS || imgs.cols > RAD_CANVAS {
        return input(format!("images of {}x{} do not fit the {RAD_CANVAS}x{RAD_CANVAS} canvas", imgs.rows, imgs.cols));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 256];
    for (i, &l) in imgs.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let digits: Vec<usize> = (0..256).filter(|&c| !by_class[c].is_empty()).collect();
    let (r0, c0) = ((RAD_CANVAS - imgs.rows) / 2, (RAD_CANVAS - imgs.cols) / 2);
    let pad = |img: &[u8]| {
        let mut canvas = vec![0.0; RAD_CANVAS * RAD_CANVAS];
        for r in 0..imgs.rows {
            for c in 0..imgs.cols {
                canvas[(r + r0) * RAD_CANVAS + c + c0] = img[r * imgs.cols + c] as f64 / 255.0;
            }
        }
        canvas
    };
    let catalog = Combo::all();
    let classes = effect_classes(RAD_CANVAS);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let class = digits[rng.below(digits.len() as u64) as usize];
        let pool = &by_class[class];
        if pool.len() < n {
            return Err(Error::Input(format!("class {class} has {} images, fewer than n={n}", pool.len())));
        }
        let frames: Vec<Vec<f64>> = choose_distinct(rng, pool, n).into_iter().map(|i| pad(&imgs.images[i])).collect();
        out.push(draw_sequence(rng, frames, RAD_CANVAS, &catalog, &classes)?);
    }
    Ok(out)
}

/// [`rad_sequences`] as a dataset with every sample in the training split;
/// use [`crate::data::split`] next. Output width is `n + 1`.
pub fn rad_generate(imgs: &ImageSet, count: usize, n: usize, rng: &mut RngStream) -> Result<SequenceDataset> {
    let seed = rng.master_seed();
    Ok(sequence_dataset(rad_sequences(imgs, count, n, rng)?, RAD_CANVAS, n, seed))
}

/// A class prototype: a random-walk stroke inside the glyph core, which
/// leaves a two-pixel margin on every side.
fn glyph_prototype(rng: &mut RngStream, side: usize) -> Vec<bool> {
    let margin = 2;
    let core = side - 2 * margin;
    let mut on = vec![false; side * side];
    let (mut r, mut c) = (rng.below(core as u64) as usize, rng.below(core as u64) as usize);
    for _ in 0..core * core / 2 {
        on[(r + margin) * side + c + margin] = true;
        match rng.below(4) {
            0 if r > 0 => r -= 1,
            1 if r + 1 < core => r += 1,
            2 if c > 0 => c -= 1,
            3 if c + 1 < core => c += 1,
            _ => {}
        }
    }
    on
}

/// A noisy instance of a prototype: stroke intensities in [0.6, 1) and
/// occasional faint speckle inside the core.
fn glyph_instance(rng: &mut RngStream, proto: &[bool], side: usize) -> Vec<f64> {
    let margin = 2;
    let mut img = vec![0.0; side * side];
    for r in margin..side - margin {
        for c in margin..side - margin {
            let i = r * side + c;
            img[i] = if proto[i] {
                rng.uniform_range(0.6, 1.0)
            } else if rng.uniform() < 0.08 {
                rng.uniform_range(0.0, 0.4)
            } else {
                0.0
            };
        }
    }
    img
}

/// Self-contained variant with procedural glyphs on a `side x side` canvas.
pub fn rad_lite_sequences(count: usize, n: usize, side: usize, rng: &mut RngStream) -> Result<Vec<RadSequence>> {
    if side < 8 {
        return config(format!("glyph side must be >= 8, got {side}"));
    }
    if n < 2 {
        return config("sequence length n must be >= 2");
    }
    let protos: Vec<Vec<bool>> = (0..LITE_CLASSES)
        .map(|c| glyph_prototype(&mut rng.split(c as u64), side))
        .collect();
    let catalog = Combo::all();
    let classes = effect_classes(side);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let class = rng.below(LITE_CLASSES as u64) as usize;
        let frames: Vec<Vec<f64>> = (0..n).map(|_| glyph_instance(rng, &protos[class], side)).collect();
        out.push(draw_sequence(rng, frames, side, &catalog, &classes)?);
    }
    Ok(out)
}

pub fn rad_lite_generate(count: usize, n: usize, side: usize, rng: &mut RngStream) -> Result<SequenceDataset> {
    let seed = rng.master_seed();
    Ok(sequence_dataset(rad_lite_sequences(count, n, side, rng)?, side, n, seed))
}
