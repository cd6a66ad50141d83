//! Binary checkpoint format.
//!
//! ```text
//! magic     8 bytes  "CFKGRCKP"
//! version   u32
//! kind      u8       0 TransE, 1 ComplEx, 2 RESCAL, 3 TuckER
//! d_e       u32
//! d_r       u32
//! |E|       u32
//! |R|       u32
//! recip     u8
//! seed      u64
//! cfg_len   u32
//! cfg       cfg_len bytes of ModelConfig JSON
//! entity    |E| · entity_width  f64
//! relation  rows · relation_width f64
//! core      d_e · d_r · d_e f64 (TuckER only)
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{EmbeddingModel, ModelConfig, ModelKind};

pub const MAGIC: &[u8; 8] = b"CFKGRCKP";
pub const VERSION: u32 = 1;

pub fn to_bytes(model: &EmbeddingModel) -> Vec<u8> {
    let cfg = model.config();
    let cfg_json = serde_json::to_vec(cfg).expect("config serializes");
    let params = model.entity_params().len() + model.relation_params().len() + model.core_params().len();
    let mut out = Vec::with_capacity(64 + cfg_json.len() + 8 * params);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(cfg.kind.code());
    out.extend_from_slice(&(cfg.entity_dim as u32).to_le_bytes());
    out.extend_from_slice(&(model.effective_relation_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(model.num_entities() as u32).to_le_bytes());
    out.extend_from_slice(&(model.num_relations() as u32).to_le_bytes());
    out.push(cfg.reciprocal as u8);
    out.extend_from_slice(&model.seed().to_le_bytes());
    out.extend_from_slice(&(cfg_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg_json);
    for x in model
        .entity_params()
        .iter()
        .chain(model.relation_params())
        .chain(model.core_params())
    {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<EmbeddingModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = ModelKind::from_code(r.u8()?).ok_or_else(|| Error::Checkpoint("unknown model kind".into()))?;
    let de = r.u32()? as usize;
    let dr = r.u32()? as usize;
    let ne = r.u32()? as usize;
    let nr = r.u32()? as usize;
    let reciprocal = r.u8()? != 0;
    let seed = r.u64()?;
    let cfg_len = r.u32()? as usize;
    let cfg: ModelConfig = serde_json::from_slice(r.take(cfg_len)?)?;
    if cfg.kind != kind || cfg.entity_dim != de || cfg.reciprocal != reciprocal {
        return Err(Error::Checkpoint("header disagrees with embedded config".into()));
    }
    if kind == ModelKind::Tucker && cfg.relation_dim != dr {
        return Err(Error::Checkpoint("header disagrees with embedded config".into()));
    }
    let rows = if reciprocal { 2 * nr } else { nr };
    let entity = r.f64s(ne * cfg.entity_width())?;
    let relation = r.f64s(rows * cfg.relation_width())?;
    let core = r.f64s(cfg.core_len())?;
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    EmbeddingModel::from_parts(cfg, ne, nr, entity, relation, core, seed)
}

pub fn save(model: &EmbeddingModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<EmbeddingModel> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&buf)
}

/// Hex SHA-256 of the serialized model.
pub fn digest(model: &EmbeddingModel) -> String {
    Sha256::digest(to_bytes(model))
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
