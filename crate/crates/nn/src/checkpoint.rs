//! Binary checkpoint container: versioned header, a string manifest of
//! hyperparameters, then named little-endian f64 arrays with shapes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::NnError;
use crate::params::ParameterStore;
use crate::tensor::Tensor;

const HEADER: &[u8] = b"DRAPE-CKPT-v1\n";

/// Prefixes for optimizer moment arrays inside the container.
const MOMENT1_PREFIX: &str = "adamw.m/";
const MOMENT2_PREFIX: &str = "adamw.v/";
const STEP_KEY: &str = "adamw.step";

fn file_err(path: &Path, message: impl Into<String>) -> NnError {
    NnError::Checkpoint { path: path.display().to_string(), message: message.into() }
}

fn io_err(path: &Path, source: std::io::Error) -> NnError {
    NnError::Io { path: path.display().to_string(), source }
}

fn write_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    path: &'a Path,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.data.len() {
            return Err(file_err(self.path, "truncated file"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, NnError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| file_err(self.path, "invalid utf-8 string"))
    }
}

/// A checkpoint in memory: manifest plus named arrays in a stable order.
#[derive(Debug, Default, Clone)]
pub struct Checkpoint {
    pub manifest: BTreeMap<String, String>,
    pub arrays: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn array(&self, name: &str) -> Option<&Tensor> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut out = Vec::new();
        out.extend_from_slice(HEADER);
        out.extend_from_slice(&(self.manifest.len() as u32).to_le_bytes());
        for (k, v) in &self.manifest {
            write_string(&mut out, k);
            write_string(&mut out, v);
        }
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, tensor) in &self.arrays {
            write_string(&mut out, name);
            out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in tensor.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        file.write_all(&out).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let mut data = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| io_err(path, e))?
            .read_to_end(&mut data)
            .map_err(|e| io_err(path, e))?;
        if !data.starts_with(HEADER) {
            return Err(file_err(path, "missing or unsupported header"));
        }
        let mut cur = Cursor { path, data: &data, pos: HEADER.len() };
        let n_manifest = cur.u32()?;
        let mut manifest = BTreeMap::new();
        for _ in 0..n_manifest {
            let k = cur.string()?;
            let v = cur.string()?;
            manifest.insert(k, v);
        }
        let n_arrays = cur.u32()?;
        let mut arrays = Vec::with_capacity(n_arrays as usize);
        for _ in 0..n_arrays {
            let name = cur.string()?;
            let rank = cur.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u64()? as usize);
            }
            let count: usize = shape.iter().product();
            let bytes = cur.take(count * 8)?;
            let values = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((name, Tensor::new(shape, values).map_err(|e| file_err(path, e.to_string()))?));
        }
        Ok(Self { manifest, arrays })
    }
}

/// Save every parameter (and optionally the optimizer moments) from a store.
pub fn save_store(
    path: &Path,
    store: &ParameterStore,
    manifest: &BTreeMap<String, String>,
    include_optimizer: bool,
) -> Result<(), NnError> {
    let mut ckpt = Checkpoint { manifest: manifest.clone(), arrays: Vec::new() };
    for (name, value) in store.iter_values() {
        ckpt.arrays.push((name.to_string(), value.clone()));
    }
    if include_optimizer {
        for (name, _) in store.iter_values() {
            let (m, v) = store.optimizer_state(name)?;
            ckpt.arrays.push((format!("{MOMENT1_PREFIX}{name}"), m.clone()));
            ckpt.arrays.push((format!("{MOMENT2_PREFIX}{name}"), v.clone()));
        }
        ckpt.manifest.insert(STEP_KEY.to_string(), store.step_count().to_string());
    }
    ckpt.save(path)
}

/// Rebuild a parameter store (registration order = array order, with
/// optimizer state restored when present).
pub fn load_store(path: &Path) -> Result<(ParameterStore, BTreeMap<String, String>), NnError> {
    let ckpt = Checkpoint::load(path)?;
    let mut store = ParameterStore::new();
    for (name, tensor) in &ckpt.arrays {
        if name.starts_with(MOMENT1_PREFIX) || name.starts_with(MOMENT2_PREFIX) {
            continue;
        }
        store.register(name, tensor.clone())?;
    }
    for (name, tensor) in &ckpt.arrays {
        if let Some(base) = name.strip_prefix(MOMENT1_PREFIX) {
            let v = ckpt
                .array(&format!("{MOMENT2_PREFIX}{base}"))
                .ok_or_else(|| file_err(path, format!("missing second moment for '{base}'")))?;
            store.set_optimizer_state(base, tensor.clone(), v.clone())?;
        }
    }
    if let Some(step) = ckpt.manifest.get(STEP_KEY) {
        let step = step.parse().map_err(|_| file_err(path, "bad adamw.step value"))?;
        store.set_step_count(step);
    }
    Ok((store, ckpt.manifest))
}
