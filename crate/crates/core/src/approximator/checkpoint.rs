//! Flat binary checkpoints with a JSON manifest.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic   b"HGACCKP1"
//! u32     parameter count
//! repeat:
//!   u32   name length, then UTF-8 name bytes
//!   u32   rows, u32 cols
//!   f64   rows*cols values, row-major
//! ```
//!
//! Values are always written as IEEE binary64 so a checkpoint taken in `f32`
//! restores bit-exactly in `f32` and can be inspected from `f64` tooling.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::approximator::params::ParamStore;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"HGACCKP1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Byte offset of the first value in the binary file.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub scalar: String,
    pub total_bytes: usize,
    pub params: Vec<ManifestEntry>,
}

pub fn encode<T: Scalar>(store: &ParamStore<T>) -> (Vec<u8>, CheckpointManifest) {
    let mut out = Vec::with_capacity(16 + store.numel() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    let mut entries = Vec::with_capacity(store.len());
    for (name, p) in store.iter() {
        let (r, c) = p.shape();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(r as u32).to_le_bytes());
        out.extend_from_slice(&(c as u32).to_le_bytes());
        entries.push(ManifestEntry {
            name: name.to_string(),
            shape: [r, c],
            offset: out.len(),
        });
        for &v in p.value().iter() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format: "hgac-checkpoint-v1".into(),
        scalar: T::NAME.into(),
        total_bytes: out.len(),
        params: entries,
    };
    (out, manifest)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> std::result::Result<ParamStore<T>, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let count = r.u32()? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| format!("parameter name not UTF-8: {e}"))?
            .to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let mut vals = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            vals.push(T::lit(r.f64()?));
        }
        let arr = Array2::from_shape_vec((rows, cols), vals).map_err(|e| e.to_string())?;
        store.insert(name, arr).map_err(|e| e.to_string())?;
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(store)
}

pub fn manifest_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes `path` (binary) and its `.json` manifest next to it.
pub fn save_checkpoint<T: Scalar>(store: &ParamStore<T>, path: &Path) -> Result<CheckpointManifest> {
    let (bytes, manifest) = encode(store);
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, &bytes)?;
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Reads a checkpoint and, when present, verifies it against its manifest.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ParamStore<T>> {
    let bytes = fs::read(path)?;
    let fail = |reason: String| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    let store = decode::<T>(&bytes).map_err(fail)?;
    let mpath = manifest_path(path);
    if mpath.exists() {
        let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&mpath)?)?;
        let (_, expected) = encode(&store);
        if manifest.params != expected.params || manifest.total_bytes != bytes.len() {
            return Err(fail("manifest does not match binary contents".into()));
        }
    }
    Ok(store)
}
