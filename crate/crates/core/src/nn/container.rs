//! Weight container: `model.json` manifest plus `weights.bin`, a blob of
//! little-endian f64 arrays in manifest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::tensor::{Params, Tensor};

pub const MANIFEST_FILE: &str = "model.json";
pub const BLOB_FILE: &str = "weights.bin";
const FORMAT: &str = "rxfuse-weights/1";

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("invalid container: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub format: String,
    pub dtype: String,
    pub config: C,
    pub blob: String,
    pub tensors: Vec<TensorEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ContainerError + '_ {
    move |source| ContainerError::Io { path: path.to_path_buf(), source }
}

pub fn save_container<C: Serialize>(dir: &Path, config: &C, params: &Params) -> Result<(), ContainerError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut blob = Vec::with_capacity(params.count() * 8);
    let mut tensors = Vec::with_capacity(params.len());
    for (name, t) in params.iter() {
        tensors.push(TensorEntry { name: name.to_string(), shape: t.shape().to_vec(), offset: blob.len(), len: t.len() });
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: FORMAT.to_string(),
        dtype: "f64".to_string(),
        config,
        blob: BLOB_FILE.to_string(),
        tensors,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, json + "\n").map_err(io_err(&mpath))?;
    let bpath = dir.join(BLOB_FILE);
    fs::write(&bpath, blob).map_err(io_err(&bpath))?;
    Ok(())
}

pub fn load_container<C: DeserializeOwned>(dir: &Path) -> Result<(C, Params), ContainerError> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let manifest: Manifest<C> = serde_json::from_str(&text)?;
    if manifest.format != FORMAT {
        return Err(ContainerError::Invalid(format!("unknown format {:?}", manifest.format)));
    }
    if manifest.dtype != "f64" {
        return Err(ContainerError::Invalid(format!("unsupported dtype {:?}", manifest.dtype)));
    }
    let bpath = dir.join(&manifest.blob);
    let blob = fs::read(&bpath).map_err(io_err(&bpath))?;
    let mut params = Params::new();
    let mut expected = 0;
    for e in &manifest.tensors {
        if e.shape.iter().product::<usize>() != e.len {
            return Err(ContainerError::Invalid(format!("{}: shape does not match length", e.name)));
        }
        if e.offset != expected {
            return Err(ContainerError::Invalid(format!("{}: offset {} out of order", e.name, e.offset)));
        }
        let end = e.offset + e.len * 8;
        let bytes = blob
            .get(e.offset..end)
            .ok_or_else(|| ContainerError::Invalid(format!("{}: blob truncated", e.name)))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.add(e.name.clone(), Tensor::from_vec(&e.shape, data));
        expected = end;
    }
    if expected != blob.len() {
        return Err(ContainerError::Invalid(format!("blob has {} trailing bytes", blob.len() - expected)));
    }
    Ok((manifest.config, params))
}
