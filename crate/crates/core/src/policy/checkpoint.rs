//! Versioned binary checkpoints.
//!
//! Layout (little endian): magic `CTPLCKPT`, `u32` version, `u64` header
//! length, JSON header `{config, extra}`, `u64` tensor count, then per tensor
//! `u32` name length, UTF-8 name, `u64` rows, `u64` cols, row-major `f64`s.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde_json::Value;

use super::{ParamStore, Policy, PolicyConfig, PolicyError};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CTPLCKPT";

/// A policy plus free-form state stored next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: Policy,
    pub extra: Value,
    /// Tensors beyond the policy parameters, such as optimizer moments.
    pub extra_tensors: Vec<(String, Array2<f64>)>,
}

fn err(m: impl Into<String>) -> PolicyError {
    PolicyError::Checkpoint(m.into())
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Array2<f64>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
    for v in t.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_checkpoint(ck: &Checkpoint, out: &mut impl Write) -> Result<(), PolicyError> {
    let header = serde_json::json!({ "config": ck.policy.config, "extra": ck.extra });
    let header = serde_json::to_vec(&header).map_err(|e| err(e.to_string()))?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    let p = &ck.policy.params;
    buf.extend_from_slice(&((p.len() + ck.extra_tensors.len()) as u64).to_le_bytes());
    for id in 0..p.len() {
        put_tensor(&mut buf, p.name(id), p.tensor(id));
    }
    for (name, t) in &ck.extra_tensors {
        put_tensor(&mut buf, &format!("extra/{name}"), t);
    }
    out.write_all(&buf).map_err(|e| err(e.to_string()))
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PolicyError> {
        if self.pos + n > self.data.len() {
            return Err(err(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PolicyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PolicyError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(input: &mut impl Read) -> Result<Checkpoint, PolicyError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data).map_err(|e| err(e.to_string()))?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(err("not a checkpoint file"));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(err(format!("unsupported checkpoint version {version}")));
    }
    let hlen = c.u64()? as usize;
    let header: Value = serde_json::from_slice(c.take(hlen)?).map_err(|e| err(e.to_string()))?;
    let config: PolicyConfig = serde_json::from_value(header["config"].clone()).map_err(|e| err(e.to_string()))?;
    let count = c.u64()? as usize;
    let mut params = ParamStore::new();
    let mut extra_tensors = Vec::new();
    for _ in 0..count {
        let nlen = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(nlen)?).map_err(|e| err(e.to_string()))?.to_string();
        let rows = c.u64()? as usize;
        let cols = c.u64()? as usize;
        let bytes = c.take(rows * cols * 8)?;
        let vals: Vec<f64> = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        let t = Array2::from_shape_vec((rows, cols), vals).map_err(|e| err(e.to_string()))?;
        match name.strip_prefix("extra/") {
            Some(n) => extra_tensors.push((n.to_string(), t)),
            None => {
                params.insert(&name, t);
            }
        }
    }
    let reference = Policy::new(config.clone(), 0)?;
    if reference.params.names() != params.names() {
        return Err(err("parameter names do not match the stored config"));
    }
    for id in 0..params.len() {
        if reference.params.tensor(id).dim() != params.tensor(id).dim() {
            return Err(err(format!("shape mismatch for {}", params.name(id))));
        }
    }
    Ok(Checkpoint { policy: Policy { config, params }, extra: header["extra"].clone(), extra_tensors })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), PolicyError> {
    let mut buf = Vec::new();
    write_checkpoint(ck, &mut buf)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf).map_err(|e| err(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| err(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, PolicyError> {
    let mut f = fs::File::open(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    read_checkpoint(&mut f)
}
