use super::{m_tuples, rpi_block_with, Label, Method, RpiBlock};
use crate::error::{AceError, Result};
use crate::CONVENTION;
use nalgebra::DMatrix;
use parking_lot::RwLock;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

pub const CACHE_FORMAT: u32 = 1;

/// Memo of RPI blocks keyed by their ordered label tuple. Safe for concurrent
/// use; blocks are immutable once inserted.
#[derive(Debug)]
pub struct CouplingCache {
    method: Method,
    blocks: RwLock<FxHashMap<Vec<Label>, Arc<RpiBlock>>>,
}

impl Default for CouplingCache {
    fn default() -> Self {
        Self::new(Method::CgChain)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredBlock {
    labels: Vec<[u16; 3]>,
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
    spectrum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StoredCache {
    format: u32,
    fingerprint: String,
    method: Method,
    blocks: Vec<StoredBlock>,
}

impl CouplingCache {
    pub fn new(method: Method) -> Self {
        CouplingCache {
            method,
            blocks: RwLock::new(FxHashMap::default()),
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn len(&self) -> usize {
        self.blocks.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, labels: &[Label]) -> bool {
        self.blocks.read().contains_key(labels)
    }

    pub fn get(&self, labels: &[Label]) -> Result<Arc<RpiBlock>> {
        if let Some(b) = self.blocks.read().get(labels) {
            return Ok(b.clone());
        }
        let b = Arc::new(rpi_block_with(labels, self.method)?);
        let mut w = self.blocks.write();
        Ok(w.entry(labels.to_vec()).or_insert(b).clone())
    }

    /// Looks up a block without computing it.
    pub fn lookup(&self, labels: &[Label]) -> Option<Arc<RpiBlock>> {
        self.blocks.read().get(labels).cloned()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let r = self.blocks.read();
        let mut keys: Vec<&Vec<Label>> = r.keys().collect();
        keys.sort();
        let blocks = keys
            .into_iter()
            .map(|k| {
                let b = &r[k];
                StoredBlock {
                    labels: k.iter().map(|p| [p.z, p.n, p.l]).collect(),
                    nrows: b.u.nrows(),
                    ncols: b.u.ncols(),
                    data: b.u.as_slice().to_vec(),
                    spectrum: b.spectrum.clone(),
                }
            })
            .collect();
        let s = StoredCache {
            format: CACHE_FORMAT,
            fingerprint: CONVENTION.to_string(),
            method: self.method,
            blocks,
        };
        let text = serde_json::to_string(&s)?;
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| AceError::io(dir, e))?;
            }
        }
        std::fs::write(path, text).map_err(|e| AceError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AceError::io(path, e))?;
        let s: StoredCache = serde_json::from_str(&text)?;
        if s.format != CACHE_FORMAT {
            return Err(AceError::Version(s.format));
        }
        if s.fingerprint != CONVENTION {
            return Err(AceError::Fingerprint {
                expected: CONVENTION.into(),
                found: s.fingerprint,
            });
        }
        let mut map = FxHashMap::default();
        for b in s.blocks {
            let labels: Vec<Label> = b
                .labels
                .iter()
                .map(|t| Label { z: t[0], n: t[1], l: t[2] })
                .collect();
            let bl: Vec<usize> = labels.iter().map(|p| p.l as usize).collect();
            let rows = m_tuples(&bl);
            if rows.len() != b.nrows || b.data.len() != b.nrows * b.ncols {
                return Err(AceError::InvalidArgument(format!(
                    "cached block {:?} has inconsistent shape",
                    labels
                )));
            }
            let u = DMatrix::from_vec(b.nrows, b.ncols, b.data);
            map.insert(
                labels.clone(),
                Arc::new(RpiBlock {
                    labels,
                    rows,
                    u,
                    spectrum: b.spectrum,
                }),
            );
        }
        Ok(CouplingCache {
            method: s.method,
            blocks: RwLock::new(map),
        })
    }

    /// Loads `path` if it exists, otherwise starts empty.
    pub fn open(path: &Path, method: Method) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new(method))
        }
    }
}
