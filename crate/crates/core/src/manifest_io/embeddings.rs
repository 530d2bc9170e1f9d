//! Embedding vectors and the binary embedding store.
//!
//! File layout, all integers and floats little-endian:
//!
//! ```text
//! magic    [u8; 4]  b"DAEM"
//! version  u32      1
//! dim      u32
//! count    u64
//! count x {
//!     id_len      u32
//!     video_id    [u8; id_len]   UTF-8
//!     frame_index u32
//!     values      [f32; dim]
//! }
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const EMBEDDING_MAGIC: [u8; 4] = *b"DAEM";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported embedding file version {0}")]
    UnsupportedVersion(u32),
    #[error("embedding dimension must be between 1 and u32::MAX")]
    InvalidDim,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("non-finite embedding component at index {index}")]
    NonFinite { index: usize },
    #[error("truncated embedding file ({context})")]
    Truncated { context: &'static str },
    #[error("entry {entry}: video id is not valid UTF-8")]
    InvalidUtf8 { entry: u64 },
    #[error("duplicate entry for video `{video_id}` frame {frame}")]
    Duplicate { video_id: String, frame: u32 },
    #[error("{0} trailing bytes after the last entry")]
    TrailingBytes(usize),
}

/// A face embedding: a finite vector of `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

/// Embeddings keyed by `(video_id, frame_index)`, iterated in key order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: BTreeMap<(String, u32), Embedding>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(EmbeddingError::InvalidDim);
        }
        Ok(Self { dim, entries: BTreeMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts or replaces an entry. Rejects vectors of the wrong length.
    pub fn insert(
        &mut self,
        video_id: impl Into<String>,
        frame: u32,
        embedding: Embedding,
    ) -> Result<Option<Embedding>, EmbeddingError> {
        if embedding.len() != self.dim {
            return Err(EmbeddingError::DimMismatch { expected: self.dim, found: embedding.len() });
        }
        Ok(self.entries.insert((video_id.into(), frame), embedding))
    }

    pub fn get(&self, video_id: &str, frame: u32) -> Option<&Embedding> {
        // BTreeMap<(String, u32)> cannot be queried with (&str, u32) directly.
        self.entries.get(&(video_id.to_owned(), frame))
    }

    pub fn contains(&self, video_id: &str, frame: u32) -> bool {
        self.get(video_id, frame).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32, &Embedding)> {
        self.entries.iter().map(|((v, f), e)| (v.as_str(), *f, e))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.entries.len() * (16 + 4 * self.dim));
        out.extend_from_slice(&EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for ((video_id, frame), emb) in &self.entries {
            out.extend_from_slice(&(video_id.len() as u32).to_le_bytes());
            out.extend_from_slice(video_id.as_bytes());
            out.extend_from_slice(&frame.to_le_bytes());
            for v in emb.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let mut cur = Cursor { buf: bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
        if magic != EMBEDDING_MAGIC {
            return Err(EmbeddingError::BadMagic { found: magic });
        }
        let version = cur.u32("version")?;
        if version != EMBEDDING_VERSION {
            return Err(EmbeddingError::UnsupportedVersion(version));
        }
        let dim = cur.u32("dim")? as usize;
        let count = cur.u64("count")?;
        let mut store = Self::new(dim)?;
        for entry in 0..count {
            let id_len = cur.u32("id length")? as usize;
            let id = std::str::from_utf8(cur.take(id_len, "video id")?)
                .map_err(|_| EmbeddingError::InvalidUtf8 { entry })?
                .to_owned();
            let frame = cur.u32("frame index")?;
            let payload = cur.take(dim * 4, "vector payload")?;
            let values: Vec<f32> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let emb = Embedding::new(values)?;
            if store.insert(id.clone(), frame, emb)?.is_some() {
                return Err(EmbeddingError::Duplicate { video_id: id, frame });
            }
        }
        let rest = bytes.len() - cur.pos;
        if rest != 0 {
            return Err(EmbeddingError::TrailingBytes(rest));
        }
        Ok(store)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8], EmbeddingError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(EmbeddingError::Truncated { context })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, context: &'static str) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4, context)?.try_into().unwrap()))
    }

    fn u64(&mut self, context: &'static str) -> Result<u64, EmbeddingError> {
        Ok(u64::from_le_bytes(self.take(8, context)?.try_into().unwrap()))
    }
}

pub fn write_embeddings(store: &EmbeddingStore, path: &Path) -> Result<(), EmbeddingError> {
    let io = |source| EmbeddingError::Io { path: path.to_path_buf(), source };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    f.write_all(&store.to_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingStore, EmbeddingError> {
    let io = |source| EmbeddingError::Io { path: path.to_path_buf(), source };
    let mut bytes = Vec::new();
    std::fs::File::open(path).map_err(io)?.read_to_end(&mut bytes).map_err(io)?;
    EmbeddingStore::from_bytes(&bytes)
}
