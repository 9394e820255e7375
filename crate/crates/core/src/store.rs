//! Precomputed embeddings keyed by sample id. Lets externally produced
//! encoder outputs stand in for the built-in encoder.
//!
//! File layout (all integers u32 little-endian):
//!
//! ```text
//! "LADE" version=1 dim N
//! N x { id_len, id (UTF-8), dim x f32 }
//! ```

use std::collections::HashMap;
use std::path::Path;

use crate::encoder::{dot, EmbeddingVector};
use crate::error::{Error, Result};
use crate::io::{write_bytes, ByteReader, ByteWriter};

pub const STORE_MAGIC: &[u8; 4] = b"LADE";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore { dim, ids: Vec::new(), vectors: Vec::new(), index: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn insert(&mut self, id: &str, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Config(format!("vector for {id} has dimension {}, store {}", v.len(), self.dim)));
        }
        if self.index.contains_key(id) {
            return Err(Error::Config(format!("duplicate id {id} in embedding store")));
        }
        self.index.insert(id.to_string(), self.ids.len());
        self.ids.push(id.to_string());
        self.vectors.push(v.iter().map(|&x| x as f32).collect());
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(STORE_MAGIC);
        w.u32(STORE_VERSION);
        w.u32(self.dim as u32);
        w.u32(self.ids.len() as u32);
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            w.str(id);
            for &x in v {
                w.f32(x);
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(bytes, path);
        if r.take(4)? != STORE_MAGIC {
            return Err(r.error("not an embedding store"));
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(r.error(format!("unsupported store version {version}")));
        }
        let dim = r.u32()? as usize;
        let n = r.u32()? as usize;
        let mut store = EmbeddingStore::new(dim);
        for _ in 0..n {
            let id = r.str()?;
            let v = (0..dim).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
            store.insert(&id, &v).map_err(|e| r.error(e.to_string()))?;
        }
        r.finish()?;
        Ok(store)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Stored vectors for `ids`, re-normalized to unit length.
pub fn encode_batch_precomputed(ids: &[String], store: &EmbeddingStore) -> Result<Vec<EmbeddingVector>> {
    ids.iter()
        .map(|id| {
            let v: Vec<f64> = store.get(id).ok_or_else(|| Error::MissingRecord(id.clone()))?.iter().map(|&x| f64::from(x)).collect();
            let n = dot(&v, &v).sqrt();
            if !n.is_finite() {
                return Err(Error::NonFinite(format!("stored embedding {id}")));
            }
            if n == 0.0 {
                return Err(Error::ZeroNorm);
            }
            Ok(v.iter().map(|x| x / n).collect())
        })
        .collect()
}
