//! Binary checkpoint container.
//!
//! Layout: 8-byte magic, u32 format version, u64 manifest length, JSON
//! manifest, then every tensor as little-endian f32 in manifest order.
//! A text file next to the checkpoint lists tensor names and shapes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{Direction, EncDecModel, ModelDims, Params, TrainingMeta, PARAM_NAMES};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SNPMCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub tool_version: String,
    pub direction: Direction,
    pub dims: ModelDims,
    pub meta: TrainingMeta,
    pub src_vocab_hash: String,
    pub tgt_vocab_hash: String,
    pub config_hash: String,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub tensors: Vec<TensorEntry>,
}

pub fn text_manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.txt");
    PathBuf::from(s)
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save(model: &EncDecModel, config_hash: &str, path: &Path) -> Result<()> {
    let manifest = CheckpointManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        direction: model.direction,
        dims: model.dims,
        meta: model.meta.clone(),
        src_vocab_hash: model.src_vocab.hash(),
        tgt_vocab_hash: model.tgt_vocab.hash(),
        config_hash: config_hash.to_string(),
        src_vocab: model.src_vocab.clone(),
        tgt_vocab: model.tgt_vocab.clone(),
        tensors: PARAM_NAMES
            .iter()
            .zip(model.params.tensors())
            .map(|(n, t)| TensorEntry {
                name: n.to_string(),
                rows: t.rows,
                cols: t.cols,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest).map_err(|source| Error::Json {
        context: "checkpoint manifest".into(),
        source,
    })?;
    let mut buf = Vec::with_capacity(20 + json.len() + 4 * model.params.count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in model.params.tensors() {
        for v in &t.data {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(path, &buf).map_err(file_err(path))?;

    let txt = text_manifest_path(path);
    let mut f = fs::File::create(&txt).map_err(file_err(&txt))?;
    let mut text = format!(
        "# snipmine checkpoint v{FORMAT_VERSION}\ndirection {}\ncell {:?}\nembed {}\nhidden {}\nsrc_vocab {} {}\ntgt_vocab {} {}\nseed {}\nsteps {}\nconfig_hash {}\n",
        model.direction.as_str(),
        model.dims.cell,
        model.dims.embed,
        model.dims.hidden,
        model.dims.src_vocab,
        manifest.src_vocab_hash,
        model.dims.tgt_vocab,
        manifest.tgt_vocab_hash,
        model.meta.seed,
        model.meta.steps,
        config_hash,
    );
    for e in &manifest.tensors {
        text.push_str(&format!("tensor {} {} {}\n", e.name, e.rows, e.cols));
    }
    f.write_all(text.as_bytes()).map_err(file_err(&txt))?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|e| *e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("file is truncated".into()))?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

pub fn from_bytes(bytes: &[u8]) -> Result<(EncDecModel, CheckpointManifest)> {
    let mut pos = 0;
    if take(bytes, &mut pos, 8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(bytes, &mut pos, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let len = u64::from_le_bytes(take(bytes, &mut pos, 8)?.try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| Error::Checkpoint("manifest too large".into()))?;
    let manifest: CheckpointManifest =
        serde_json::from_slice(take(bytes, &mut pos, len)?).map_err(|source| Error::Json {
            context: "checkpoint manifest".into(),
            source,
        })?;
    if manifest.src_vocab.hash() != manifest.src_vocab_hash || manifest.tgt_vocab.hash() != manifest.tgt_vocab_hash {
        return Err(Error::Checkpoint("vocabulary hash mismatch".into()));
    }
    if manifest.src_vocab.len() != manifest.dims.src_vocab || manifest.tgt_vocab.len() != manifest.dims.tgt_vocab {
        return Err(Error::Checkpoint("vocabulary size does not match dims".into()));
    }
    let mut params = Params::zeros(&manifest.dims);
    if manifest.tensors.len() != PARAM_NAMES.len() {
        return Err(Error::Checkpoint("wrong number of tensors".into()));
    }
    for ((entry, name), t) in manifest.tensors.iter().zip(PARAM_NAMES).zip(params.tensors_mut()) {
        if entry.name != name || entry.rows != t.rows || entry.cols != t.cols {
            return Err(Error::Checkpoint(format!(
                "tensor {} has shape {}x{}, expected {name} {}x{}",
                entry.name, entry.rows, entry.cols, t.rows, t.cols
            )));
        }
        let raw = take(bytes, &mut pos, 4 * t.len())?;
        for (v, chunk) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
    }
    if pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - pos)));
    }
    if !params.all_finite() {
        return Err(Error::Checkpoint("non-finite parameter values".into()));
    }
    let model = EncDecModel {
        direction: manifest.direction,
        dims: manifest.dims,
        src_vocab: manifest.src_vocab.clone(),
        tgt_vocab: manifest.tgt_vocab.clone(),
        params,
        meta: manifest.meta.clone(),
    };
    Ok((model, manifest))
}

pub fn load(path: &Path) -> Result<(EncDecModel, CheckpointManifest)> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    from_bytes(&bytes)
}

/// Rounds every parameter through f32, matching what a save/load cycle yields.
pub fn round_to_f32(params: &mut Params) {
    for t in params.tensors_mut() {
        t.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
}
