//! Self-describing parameter archive.
//!
//! Layout: the magic line `TRIPLINK-CKPT\n`, a little-endian `u64` header
//! length, a JSON header (format version, model configuration, run
//! configuration, relation schema, vocabulary and a tensor table of
//! `{name, shape, offset}`), then every tensor as little-endian `f64` in
//! row-major order. Reloading reproduces every value bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::corpus::{RelationSchema, Tokenizer, Vocab};
use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::train::RunConfig;

const MAGIC: &[u8] = b"TRIPLINK-CKPT\n";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to run a trained extractor on raw text.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub schema: RelationSchema,
    pub tokenizer: Tokenizer,
    pub run_config: RunConfig,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    model_config: ModelConfig,
    run_config: RunConfig,
    schema: RelationSchema,
    vocab: Vocab,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let mut tensors = Vec::new();
    let mut data: Vec<u8> = Vec::new();
    for (name, t) in ckpt.model.tensors() {
        let (r, c) = t.dim();
        tensors.push(TensorEntry { name, shape: [r, c], offset: data.len() });
        for v in t.iter() {
            data.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        version: CHECKPOINT_VERSION,
        model_config: ckpt.model.config.clone(),
        run_config: ckpt.run_config.clone(),
        schema: ckpt.schema.clone(),
        vocab: ckpt.tokenizer.vocab().clone(),
        tensors,
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + header.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&data);
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    if !bytes.starts_with(MAGIC) || bytes.len() < MAGIC.len() + 8 {
        return Err(Error::Checkpoint("not a triplink checkpoint".into()));
    }
    let mut len = [0u8; 8];
    len.copy_from_slice(&bytes[MAGIC.len()..MAGIC.len() + 8]);
    let header_len = u64::from_le_bytes(len) as usize;
    let header_start = MAGIC.len() + 8;
    let data_start = header_start
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[header_start..data_start])?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", header.version)));
    }
    let data = &bytes[data_start..];

    // Build a model of the recorded shape, then overwrite every tensor.
    let mut rng = crate::rng::seeded(0);
    let mut model = Model::new(header.model_config.clone(), &mut rng)?;
    let mut slots = model.tensors_mut();
    if slots.len() != header.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "archive holds {} tensors, configuration expects {}",
            header.tensors.len(),
            slots.len()
        )));
    }
    for ((name, slot), entry) in slots.iter_mut().zip(&header.tensors) {
        if *name != entry.name || slot.dim() != (entry.shape[0], entry.shape[1]) {
            return Err(Error::Checkpoint(format!(
                "tensor {} with shape {:?} does not match expected {} with shape {:?}",
                entry.name,
                entry.shape,
                name,
                slot.dim()
            )));
        }
        let n = entry.shape[0] * entry.shape[1];
        let end = entry.offset + n * 8;
        let raw = data
            .get(entry.offset..end)
            .ok_or_else(|| Error::Checkpoint(format!("tensor {} extends past end of file", entry.name)))?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        **slot = Matrix::from_shape_vec((entry.shape[0], entry.shape[1]), values)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    drop(slots);
    if header.schema.len() != header.model_config.relations {
        return Err(Error::Checkpoint(format!(
            "schema has {} relations, model has {}",
            header.schema.len(),
            header.model_config.relations
        )));
    }
    Ok(Checkpoint { model, schema: header.schema, tokenizer: Tokenizer::new(header.vocab), run_config: header.run_config })
}
