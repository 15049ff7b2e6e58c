//! Binary checkpoint: magic, format version, a JSON header (model config,
//! tokenizer, tensor index, optional optimizer step and caller metadata), then
//! every tensor as little-endian `f64`, followed by the optimizer moments when
//! present.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::{LoraConfig, ModelConfig};
use crate::tokenizer::Tokenizer;
use crate::transformer::Model;
use crate::{ModelError, Result};

pub const MAGIC: &[u8; 8] = b"DGLSCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Adam-style first and second moments, one pair per model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub tokenizer: Tokenizer,
    pub optimizer: Option<OptimizerState>,
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: [usize; 2],
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    tokenizer: Tokenizer,
    lora: Option<LoraConfig>,
    merged: bool,
    tensors: Vec<TensorInfo>,
    optimizer_step: Option<u64>,
    meta: serde_json::Value,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

fn write_tensor(out: &mut Vec<u8>, t: &Array2<f64>) {
    for v in t.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_tensor(data: &[u8], offset: &mut usize, shape: [usize; 2]) -> Result<Array2<f64>> {
    let n = shape[0] * shape[1];
    let end = *offset + n * 8;
    if end > data.len() {
        return Err(bad("truncated tensor data"));
    }
    let values: Vec<f64> = data[*offset..end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    *offset = end;
    Array2::from_shape_vec((shape[0], shape[1]), values).map_err(|e| bad(e.to_string()))
}

pub fn to_bytes(
    model: &Model,
    tokenizer: &Tokenizer,
    optimizer: Option<&OptimizerState>,
    meta: &serde_json::Value,
) -> Result<Vec<u8>> {
    let params = &model.params().params;
    if let Some(opt) = optimizer {
        if opt.m.len() != params.len() || opt.v.len() != params.len() {
            return Err(bad("optimizer state does not match the parameter list"));
        }
    }
    let header = Header {
        version: FORMAT_VERSION,
        config: model.config().clone(),
        tokenizer: tokenizer.clone(),
        lora: model.lora.clone(),
        merged: model.merged,
        tensors: params
            .iter()
            .map(|p| TensorInfo {
                name: p.name.clone(),
                shape: [p.value.nrows(), p.value.ncols()],
                frozen: p.frozen,
            })
            .collect(),
        optimizer_step: optimizer.map(|o| o.step),
        meta: meta.clone(),
    };
    let header = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in params {
        write_tensor(&mut out, &p.value);
    }
    if let Some(opt) = optimizer {
        for t in opt.m.iter().chain(&opt.v) {
            write_tensor(&mut out, t);
        }
    }
    Ok(out)
}

pub fn from_bytes(data: &[u8]) -> Result<Checkpoint> {
    if data.len() < 20 || &data[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(data[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let len = u64::from_le_bytes(data[12..20].try_into().unwrap()) as usize;
    let header_end = 20usize
        .checked_add(len)
        .filter(|&e| e <= data.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&data[20..header_end]).map_err(|e| bad(e.to_string()))?;
    if header.config.vocab_size != header.tokenizer.vocab_size() {
        return Err(bad("tokenizer and model disagree on vocabulary size"));
    }

    let mut model = Model::new(header.config.clone(), 0)?;
    if let Some(lora) = &header.lora {
        model.apply_lora(lora, 0)?;
    }
    model.merged = header.merged;
    if model.params().params.len() != header.tensors.len() {
        return Err(bad("tensor count does not match the model layout"));
    }
    let mut offset = header_end;
    for (p, info) in model.params_mut().params.iter_mut().zip(&header.tensors) {
        if p.name != info.name || [p.value.nrows(), p.value.ncols()] != info.shape {
            return Err(bad(format!("unexpected tensor {}", info.name)));
        }
        p.value = read_tensor(data, &mut offset, info.shape)?;
        p.frozen = info.frozen;
    }
    let optimizer = match header.optimizer_step {
        Some(step) => {
            let mut m = Vec::new();
            let mut v = Vec::new();
            for info in &header.tensors {
                m.push(read_tensor(data, &mut offset, info.shape)?);
            }
            for info in &header.tensors {
                v.push(read_tensor(data, &mut offset, info.shape)?);
            }
            Some(OptimizerState { step, m, v })
        }
        None => None,
    };
    if offset != data.len() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok(Checkpoint {
        model,
        tokenizer: header.tokenizer,
        optimizer,
        meta: header.meta,
    })
}

/// Writes via a temporary sibling file so a crash never leaves a torn
/// checkpoint behind.
pub fn save(
    path: &Path,
    model: &Model,
    tokenizer: &Tokenizer,
    optimizer: Option<&OptimizerState>,
    meta: &serde_json::Value,
) -> Result<()> {
    let bytes = to_bytes(model, tokenizer, optimizer, meta)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    from_bytes(&data)
}
