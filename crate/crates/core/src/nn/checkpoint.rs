//! Binary model checkpoints: `MPMW`, a version, a JSON header and a blob of
//! little-endian f32 parameters.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, SurrogateModel};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MPMW";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the blob, in f32 elements.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub iteration: u64,
    pub params: Vec<ParamEntry>,
}

pub fn write_checkpoint(model: &SurrogateModel, iteration: u64, w: &mut impl Write) -> Result<()> {
    let mut params = Vec::new();
    let mut offset = 0;
    for p in model.params() {
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.shape.clone(),
            offset,
        });
        offset += p.len();
    }
    let header = serde_json::to_vec(&CheckpointHeader {
        model: model.config.clone(),
        iteration,
        params,
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    let mut blob = Vec::with_capacity(offset * 4);
    for p in model.params() {
        for v in &p.value {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&blob)?;
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(SurrogateModel, u64)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    let header: CheckpointHeader = serde_json::from_slice(&header)?;
    let mut blob = Vec::new();
    r.read_to_end(&mut blob)?;
    if blob.len() % 4 != 0 {
        return Err(Error::Format("truncated parameter blob".into()));
    }
    let values: Vec<f32> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let mut model = SurrogateModel::new(header.model.clone())?;
    let mut params = model.params_mut();
    if params.len() != header.params.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} parameters, model expects {}",
            header.params.len(),
            params.len()
        )));
    }
    for (p, e) in params.iter_mut().zip(&header.params) {
        if p.name != e.name || p.shape != e.shape {
            return Err(Error::Format(format!(
                "parameter {} {:?} does not match checkpoint entry {} {:?}",
                p.name, p.shape, e.name, e.shape
            )));
        }
        let end = e.offset + p.len();
        if end > values.len() {
            return Err(Error::Format(format!("parameter {} runs past the blob", e.name)));
        }
        p.value.copy_from_slice(&values[e.offset..end]);
    }
    Ok((model, header.iteration))
}

pub fn save(model: &SurrogateModel, iteration: u64, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(model, iteration, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(SurrogateModel, u64)> {
    let bytes = fs::read(path)?;
    read_checkpoint(&mut bytes.as_slice())
}
