//! Parameter checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"SGNETCK1"            8-byte magic
//! u64                    manifest length in bytes
//! manifest               UTF-8 JSON, see `Manifest`
//! f64 * total            parameter buffers, back to back, in manifest order
//! ```
//!
//! Values are stored as raw IEEE-754 bit patterns, so save/load is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NumericsError, ParamStore, Tensor};

const MAGIC: &[u8; 8] = b"SGNETCK1";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    metadata: BTreeMap<String, String>,
    tensors: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the data section, in f64 elements.
    offset: usize,
}

/// Parameters plus free-form string metadata (typically the model config).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0;
        let tensors = self
            .params
            .iter()
            .map(|p| {
                let e = Entry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    offset,
                };
                offset += p.value.len();
                e
            })
            .collect();
        let manifest = Manifest {
            format: "sgnet-checkpoint".into(),
            version: 1,
            metadata: self.metadata.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(16 + json.len() + offset * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.params.iter() {
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NumericsError> {
        let bad = |m: &str| NumericsError::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing checkpoint magic"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let json = bytes
            .get(16..16 + len)
            .ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest =
            serde_json::from_slice(json).map_err(|e| bad(&format!("manifest: {e}")))?;
        if manifest.format != "sgnet-checkpoint" || manifest.version != 1 {
            return Err(bad("unsupported checkpoint format"));
        }
        let data = &bytes[16 + len..];
        let mut params = ParamStore::new();
        for e in manifest.tensors {
            let count: usize = e.shape.iter().product();
            let start = e.offset * 8;
            let chunk = data
                .get(start..start + count * 8)
                .ok_or_else(|| bad(&format!("truncated data for {}", e.name)))?;
            let values = chunk
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            if params.id_of(&e.name).is_some() {
                return Err(bad(&format!("duplicate tensor {}", e.name)));
            }
            params.add(e.name, Tensor::new(e.shape, values)?);
        }
        Ok(Checkpoint {
            params,
            metadata: manifest.metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NumericsError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| NumericsError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, NumericsError> {
        let bytes = std::fs::read(path).map_err(|e| NumericsError::Io(path.display().to_string(), e))?;
        Self::from_bytes(&bytes)
    }

    /// Copies values into `store` by name; every parameter of `store` must be present
    /// with the same shape.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<(), NumericsError> {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = store.get(id).name.clone();
            let src = self
                .params
                .id_of(&name)
                .ok_or_else(|| NumericsError::Checkpoint(format!("missing tensor {name}")))?;
            let value = self.params.value(src);
            if value.shape() != store.value(id).shape() {
                return Err(NumericsError::Checkpoint(format!(
                    "shape mismatch for {name}: {:?} vs {:?}",
                    value.shape(),
                    store.value(id).shape()
                )));
            }
            store.get_mut(id).value = value.clone();
        }
        Ok(())
    }
}
