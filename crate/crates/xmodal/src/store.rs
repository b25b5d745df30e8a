//! Binary parameter container.
//!
//! Layout: magic `PDXM`, format version (u32 LE), manifest length (u64
//! LE), JSON manifest, payload of f64 LE values in tensor order, then the
//! SHA-256 of everything before it.

use std::io::{Read, Write};

use perdyn_core::Real;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, XmodalError};
use crate::mat::Mat;
use crate::params::{ModelParams, ModelShape, Weights};

pub const MAGIC: &[u8; 4] = b"PDXM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub shape: ModelShape,
    pub tensors: Vec<TensorEntry>,
}

fn bad(msg: impl Into<String>) -> XmodalError {
    XmodalError::Format(msg.into())
}

fn manifest_for(shape: &ModelShape) -> Manifest {
    let layout = Weights::layout(shape);
    let tensors = layout
        .names()
        .into_iter()
        .zip(layout.refs())
        .map(|(name, s)| TensorEntry {
            name,
            rows: s.rows,
            cols: s.cols,
        })
        .collect();
    Manifest { shape: *shape, tensors }
}

pub fn to_bytes<T: Real>(params: &ModelParams<T>) -> Result<Vec<u8>> {
    params.validate()?;
    let manifest = serde_json::to_vec(&manifest_for(&params.shape)).map_err(|e| bad(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + manifest.len() + 8 * params.n_parameters() + 32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    buf.extend_from_slice(&manifest);
    for m in params.weights.refs() {
        for v in m.data() {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<ModelParams<T>> {
    if bytes.len() < 16 + 32 {
        return Err(bad("file too short"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(bad("checksum mismatch"));
    }
    if &body[..4] != MAGIC {
        return Err(bad("not a parameter file"));
    }
    let version = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let mlen = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
    let rest = &body[16..];
    if mlen > rest.len() {
        return Err(bad("manifest length exceeds file"));
    }
    let manifest: Manifest = serde_json::from_slice(&rest[..mlen]).map_err(|e| bad(format!("manifest: {e}")))?;
    manifest.shape.validate()?;
    if manifest != manifest_for(&manifest.shape) {
        return Err(bad("tensor manifest does not match the declared shape"));
    }
    let payload = &rest[mlen..];
    let expected: usize = manifest.tensors.iter().map(|t| t.rows * t.cols).sum();
    if payload.len() != 8 * expected {
        return Err(bad(format!("payload holds {} bytes, expected {}", payload.len(), 8 * expected)));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let weights = Weights::layout(&manifest.shape).map(|_, s| {
        let data: Vec<T> = values.by_ref().take(s.rows * s.cols).map(T::lit).collect();
        Mat::new(s.rows, s.cols, data).expect("sized by manifest")
    });
    let params = ModelParams {
        shape: manifest.shape,
        weights,
    };
    params.validate()?;
    Ok(params)
}

pub fn save<T: Real, W: Write>(params: &ModelParams<T>, mut out: W) -> Result<()> {
    out.write_all(&to_bytes(params)?)?;
    Ok(())
}

pub fn load<T: Real, R: Read>(mut input: R) -> Result<ModelParams<T>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
