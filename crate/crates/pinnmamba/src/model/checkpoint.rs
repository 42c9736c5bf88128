//! Flat text checkpoints: a version header, the model configuration as
//! `key = value` lines, then one `tensor <name> <rank> <dims..>` header per
//! tensor followed by its values as hexadecimal f64 bit patterns (one line,
//! space separated). Hex bits make the round trip exact.

use super::{Activation, Arch, Model, ModelConfig, SsmKind};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "pinnmamba-checkpoint v1";

pub fn save_checkpoint(path: &Path, model: &Model, params: &[f64]) -> Result<()> {
    assert_eq!(params.len(), model.n_params(), "parameter count mismatch");
    let c = &model.config;
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(out, "arch = {}", c.arch.name());
    let _ = writeln!(out, "embed_dim = {}", c.embed_dim);
    let _ = writeln!(out, "hidden = {}", c.hidden);
    let _ = writeln!(out, "inner_mult = {}", c.inner_mult);
    let _ = writeln!(out, "state = {}", c.state);
    let _ = writeln!(out, "blocks = {}", c.blocks);
    let _ = writeln!(out, "depth = {}", c.depth);
    let _ = writeln!(out, "activation = {}", c.activation.name());
    let _ = writeln!(out, "ssm = {}", c.ssm.name());
    for spec in &model.layout.tensors {
        let _ = write!(out, "tensor {} {}", spec.name, spec.shape.len());
        for d in &spec.shape {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
        let vals = &params[spec.offset..spec.offset + spec.len()];
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:016x}", v.to_bits());
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: line + 1,
        msg,
    };
    let (_, magic) = lines
        .next()
        .ok_or_else(|| bad(0, "empty checkpoint".into()))?;
    if magic.trim() != MAGIC {
        return Err(bad(0, format!("bad magic '{magic}'")));
    }

    let mut fields = BTreeMap::new();
    let mut tensor_lines = Vec::new();
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("tensor ") || !tensor_lines.is_empty() {
            tensor_lines.push((ln, line.to_string()));
        } else if let Some((k, v)) = line.split_once('=') {
            fields.insert(k.trim().to_string(), v.trim().to_string());
        } else {
            return Err(bad(ln, format!("expected 'key = value', got '{line}'")));
        }
    }
    let get = |k: &str| -> Result<&String> {
        fields
            .get(k)
            .ok_or_else(|| Error::Checkpoint(format!("missing field '{k}'")))
    };
    let num = |k: &str| -> Result<usize> {
        get(k)?
            .parse::<usize>()
            .map_err(|e| Error::Checkpoint(format!("field '{k}': {e}")))
    };
    let config = ModelConfig {
        arch: Arch::parse(get("arch")?)?,
        embed_dim: num("embed_dim")?,
        hidden: num("hidden")?,
        inner_mult: num("inner_mult")?,
        state: num("state")?,
        blocks: num("blocks")?,
        depth: num("depth")?,
        activation: Activation::parse(get("activation")?)?,
        ssm: SsmKind::parse(get("ssm")?)?,
    };
    let model = Model::new(config);
    let mut params = vec![0.0f64; model.n_params()];
    let mut it = tensor_lines.iter();
    for spec in &model.layout.tensors {
        let (ln, header) = it
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{}'", spec.name)))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("tensor") {
            return Err(bad(*ln, format!("expected tensor header, got '{header}'")));
        }
        let name = parts
            .next()
            .ok_or_else(|| bad(*ln, "tensor header missing name".into()))?;
        if name != spec.name {
            return Err(bad(
                *ln,
                format!("expected tensor '{}', found '{name}'", spec.name),
            ));
        }
        let dims: Vec<usize> = parts.skip(1).map(|d| d.parse().unwrap_or(0)).collect();
        if dims != spec.shape {
            return Err(bad(
                *ln,
                format!("tensor '{name}' shape {dims:?} != expected {:?}", spec.shape),
            ));
        }
        let (vln, values) = it
            .next()
            .ok_or_else(|| bad(*ln, format!("tensor '{name}' missing values")))?;
        let slot = &mut params[spec.offset..spec.offset + spec.len()];
        let mut count = 0usize;
        for (tok, dst) in values.split_whitespace().zip(slot.iter_mut()) {
            let bits = u64::from_str_radix(tok, 16)
                .map_err(|e| bad(*vln, format!("bad hex value '{tok}': {e}")))?;
            *dst = f64::from_bits(bits);
            count += 1;
        }
        if count != spec.len() {
            return Err(bad(
                *vln,
                format!("tensor '{name}': {count} values, expected {}", spec.len()),
            ));
        }
    }
    Ok((model, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = Model::new(ModelConfig {
            embed_dim: 4,
            hidden: 6,
            state: 3,
            ..ModelConfig::default()
        });
        let params = model.init_params(123);
        save_checkpoint(&path, &model, &params).unwrap();
        let (loaded, lparams) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config, model.config);
        assert_eq!(lparams.len(), params.len());
        for (a, b) in params.iter().zip(&lparams) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, "not a checkpoint\n").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
