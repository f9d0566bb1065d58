//! Flat `key = value` text format for [`BlockSpec`].
//!
//! ```text
//! format = brnn-spec-1
//! input_dim = 2500
//! hidden_dim = 185
//! output_dim = 10
//! activation = tanh
//! learning_rate = 0.001
//! block.hx.mean = 0
//! block.hx.std = 0.1
//! block.hx.sparsity = 0.07
//! ...
//! ```
//!
//! Every key is required exactly once. Blank lines and lines starting with
//! `#` are ignored. Numbers use Rust's shortest round-trip formatting, so a
//! written spec parses back to identical bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::block::{BlockConfig, BlockId, BlockSpec};
use crate::error::{Error, Result};

pub const SPEC_FORMAT: &str = "brnn-spec-1";

pub fn write_spec(spec: &BlockSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format = {SPEC_FORMAT}");
    let _ = writeln!(s, "input_dim = {}", spec.input_dim);
    let _ = writeln!(s, "hidden_dim = {}", spec.hidden_dim);
    let _ = writeln!(s, "output_dim = {}", spec.output_dim);
    let _ = writeln!(s, "activation = {}", spec.activation);
    let _ = writeln!(s, "learning_rate = {:?}", spec.learning_rate);
    for id in BlockId::ALL {
        let b = spec.block(id);
        let k = id.key();
        let _ = writeln!(s, "block.{k}.mean = {:?}", b.mean);
        let _ = writeln!(s, "block.{k}.std = {:?}", b.std);
        let _ = writeln!(s, "block.{k}.sparsity = {:?}", b.sparsity);
    }
    s
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Config(format!("spec line {line}: {}", msg.into()))
}

pub fn parse_spec(text: &str) -> Result<BlockSpec> {
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(i + 1, format!("expected key = value, got {line:?}")))?;
        let k = k.trim().to_string();
        if kv.insert(k.clone(), (i + 1, v.trim().to_string())).is_some() {
            return Err(bad(i + 1, format!("duplicate key {k}")));
        }
    }
    let mut take = |key: &str| -> Result<(usize, String)> {
        kv.remove(key).ok_or_else(|| Error::Config(format!("spec is missing key {key}")))
    };
    let (ln, format) = take("format")?;
    if format != SPEC_FORMAT {
        return Err(bad(ln, format!("unsupported format {format:?}, expected {SPEC_FORMAT}")));
    }
    fn num<T: std::str::FromStr>(key: &str, (ln, v): (usize, String)) -> Result<T> {
        v.parse().map_err(|_| bad(ln, format!("{key}: cannot parse {v:?}")))
    }
    let input_dim = num("input_dim", take("input_dim")?)?;
    let hidden_dim = num("hidden_dim", take("hidden_dim")?)?;
    let output_dim = num("output_dim", take("output_dim")?)?;
    let (ln, act) = take("activation")?;
    let activation = act.parse().map_err(|e: Error| bad(ln, e.to_string()))?;
    let learning_rate = num("learning_rate", take("learning_rate")?)?;
    let mut blocks = [BlockConfig::new(0.0, 0.0, 0.0); 6];
    for id in BlockId::ALL {
        let k = id.key();
        let field = |f: &str| format!("block.{k}.{f}");
        blocks[id.index()] = BlockConfig::new(
            num(&field("mean"), take(&field("mean"))?)?,
            num(&field("std"), take(&field("std"))?)?,
            num(&field("sparsity"), take(&field("sparsity"))?)?,
        );
    }
    if let Some((k, (ln, _))) = kv.into_iter().next() {
        return Err(bad(ln, format!("unknown key {k}")));
    }
    let spec = BlockSpec { input_dim, hidden_dim, output_dim, blocks, activation, learning_rate };
    spec.validate()?;
    Ok(spec)
}
