//! Versioned weights file.
//!
//! Layout: the 8-byte magic `DFECAE01`, a little-endian `u64` header length,
//! a UTF-8 JSON header, then every tensor listed in the header as raw
//! little-endian `f32` values in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adamax::{Adamax, AdamaxConfig};
use super::config::{CaeConfig, TensorShape};
use super::model::CaeModel;
use super::train::{EpochRecord, TrainState};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DFECAE01";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OptimizerHeader {
    config: AdamaxConfig,
    step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    config: CaeConfig,
    tensors: Vec<TensorShape>,
    history: Vec<EpochRecord>,
    optimizer: Option<OptimizerHeader>,
}

fn optimizer_shapes(config: &CaeConfig) -> Vec<TensorShape> {
    let params: Vec<TensorShape> = config
        .tensor_shapes()
        .into_iter()
        .filter(|t| !t.name.contains("running_"))
        .collect();
    let mut out = Vec::new();
    for prefix in ["adamax.m", "adamax.u"] {
        for t in &params {
            out.push(TensorShape { name: format!("{prefix}.{}", t.name), shape: t.shape.clone() });
        }
    }
    out
}

fn write_file(path: &Path, header: &Header, tensors: &[&[f32]]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + tensors.iter().map(|t| 4 * t.len()).sum::<usize>());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in tensors {
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn save_model(model: &CaeModel, path: impl AsRef<Path>) -> Result<()> {
    save_with_history(model, &[], path)
}

/// Saves a model together with its training loss history.
pub fn save_with_history(model: &CaeModel, history: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let header = Header {
        format: String::from_utf8_lossy(MAGIC).into_owned(),
        config: model.config().clone(),
        tensors: model.config().tensor_shapes(),
        history: history.to_vec(),
        optimizer: None,
    };
    write_file(path.as_ref(), &header, &model.tensors())
}

/// Saves model, optimizer state and history so training can resume exactly.
pub fn save_checkpoint(state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    let config = state.model.config();
    let mut shapes = config.tensor_shapes();
    shapes.extend(optimizer_shapes(config));
    let header = Header {
        format: String::from_utf8_lossy(MAGIC).into_owned(),
        config: config.clone(),
        tensors: shapes,
        history: state.history.clone(),
        optimizer: Some(OptimizerHeader { config: state.optimizer.config, step: state.optimizer.step }),
    };
    let mut tensors = state.model.tensors();
    tensors.extend(state.optimizer.m.iter().map(Vec::as_slice));
    tensors.extend(state.optimizer.u.iter().map(Vec::as_slice));
    write_file(path.as_ref(), &header, &tensors)
}

struct Parsed {
    header: Header,
    values: Vec<Vec<f32>>,
}

fn compare_shapes(expected: &[TensorShape], found: &[TensorShape]) -> Result<()> {
    for (i, e) in expected.iter().enumerate() {
        match found.get(i) {
            Some(f) if f == e => {}
            Some(f) => {
                return Err(Error::Shape {
                    layer: e.name.clone(),
                    expected: e.shape.clone(),
                    found: if f.name == e.name { f.shape.clone() } else { Vec::new() },
                })
            }
            None => {
                return Err(Error::Shape { layer: e.name.clone(), expected: e.shape.clone(), found: Vec::new() })
            }
        }
    }
    if let Some(extra) = found.get(expected.len()) {
        return Err(Error::Shape { layer: extra.name.clone(), expected: Vec::new(), found: extra.shape.clone() });
    }
    Ok(())
}

fn parse(path: &Path) -> Result<Parsed> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(8)]).into_owned();
        return Err(Error::Version { expected: String::from_utf8_lossy(MAGIC).into_owned(), found });
    }
    if bytes.len() < 16 {
        return Err(Error::Format(format!("{}: truncated before header length", path.display())));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = 16usize
        .checked_add(hlen)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::Format(format!("{}: truncated header", path.display())))?;
    let header: Header = serde_json::from_slice(&bytes[16..body])
        .map_err(|e| Error::Format(format!("{}: bad header: {e}", path.display())))?;
    header.config.validate()?;

    let mut expected = header.config.tensor_shapes();
    if header.optimizer.is_some() {
        expected.extend(optimizer_shapes(&header.config));
    }
    compare_shapes(&expected, &header.tensors)?;

    let total: usize = expected.iter().map(TensorShape::len).sum();
    if bytes.len() != body + 4 * total {
        return Err(Error::Format(format!(
            "{}: expected {} tensor bytes, found {}",
            path.display(),
            4 * total,
            bytes.len() - body
        )));
    }
    let mut values = Vec::with_capacity(expected.len());
    let mut pos = body;
    for t in &expected {
        let v: Vec<f32> = bytes[pos..pos + 4 * t.len()]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += 4 * t.len();
        values.push(v);
    }
    Ok(Parsed { header, values })
}

fn build_model(config: CaeConfig, values: &[Vec<f32>]) -> Result<CaeModel> {
    let mut model = CaeModel::zeroed(config)?;
    let names = model.config().tensor_shapes();
    for ((dst, src), shape) in model.tensors_mut().into_iter().zip(values).zip(&names) {
        if shape.name.ends_with("running_var") && src.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Format(format!("`{}` holds a non-positive variance", shape.name)));
        }
        dst.copy_from_slice(src);
    }
    Ok(model)
}

/// Loads a model; the file's own config defines the architecture.
pub fn load_model(path: impl AsRef<Path>) -> Result<CaeModel> {
    let p = parse(path.as_ref())?;
    let n = p.header.config.tensor_shapes().len();
    build_model(p.header.config, &p.values[..n])
}

/// Loads a model that must have the architecture of `config`.
pub fn load_model_for(path: impl AsRef<Path>, config: &CaeConfig) -> Result<CaeModel> {
    let p = parse(path.as_ref())?;
    compare_shapes(&config.tensor_shapes(), &p.header.config.tensor_shapes())?;
    let n = p.header.config.tensor_shapes().len();
    build_model(p.header.config, &p.values[..n])
}

/// Loss history stored in a weights file.
pub fn load_history(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>> {
    Ok(parse(path.as_ref())?.header.history)
}

/// Restores a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainState> {
    let path = path.as_ref();
    let p = parse(path)?;
    let opt = p
        .header
        .optimizer
        .clone()
        .ok_or_else(|| Error::Format(format!("{}: holds no optimizer state", path.display())))?;
    let n = p.header.config.tensor_shapes().len();
    let model = build_model(p.header.config.clone(), &p.values[..n])?;
    let k = model.params().len();
    let m = p.values[n..n + k].to_vec();
    let u = p.values[n + k..n + 2 * k].to_vec();
    Ok(TrainState {
        model,
        optimizer: Adamax { config: opt.config, step: opt.step, m, u },
        history: p.header.history,
        last_batch_losses: Vec::new(),
    })
}
