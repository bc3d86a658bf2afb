//! Embedding matrices and the DIPE file format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DIPE"
//! 4       4     u32 version (= 1)
//! 8       8     u64 count
//! 16      4     u32 dim
//! 20      ...   count * dim little-endian f32, row major
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"DIPE";
pub const EMBEDDING_VERSION: u32 = 1;
pub const EMBEDDING_HEADER_LEN: usize = 20;

/// An `N × E` matrix of finite feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    count: usize,
    dim: usize,
    rows: Vec<f32>,
}

impl EmbeddingSet {
    pub fn new(count: usize, dim: usize, rows: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if rows.len() != count * dim {
            return Err(Error::invalid(format!(
                "{} values cannot form a {count}x{dim} matrix",
                rows.len()
            )));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at row {}, col {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { count, dim, rows })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.rows.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.rows
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(EMBEDDING_HEADER_LEN + self.rows.len() * 4);
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.count as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.rows {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < EMBEDDING_HEADER_LEN {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!(
                    "header needs {EMBEDDING_HEADER_LEN} bytes, file has {}",
                    bytes.len()
                ),
            });
        }
        if &bytes[0..4] != EMBEDDING_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic {:?}, expected \"DIPE\"", &bytes[0..4]),
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != EMBEDDING_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported version {version}"),
            });
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        if dim == 0 {
            return Err(Error::Format {
                offset: 16,
                message: "dimension is zero".into(),
            });
        }
        let expected = (EMBEDDING_HEADER_LEN as u128) + count as u128 * dim as u128 * 4;
        if bytes.len() as u128 != expected {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!("expected {expected} bytes, found {}", bytes.len()),
            });
        }
        let rows: Vec<f32> = bytes[EMBEDDING_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            let dim = dim as usize;
            return Err(Error::Format {
                offset: (EMBEDDING_HEADER_LEN + pos * 4) as u64,
                message: format!("non-finite entry at row {}, col {}", pos / dim, pos % dim),
            });
        }
        Self::new(count as usize, dim as usize, rows)
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingSet::from_bytes(&bytes)
}

pub fn write_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    fs::write(path, set.to_bytes()).map_err(|e| Error::io(path, e))
}
