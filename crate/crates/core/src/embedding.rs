//! Embedding vectors, the deterministic hashing provider and the `AWEV`
//! vector file format.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Default dimension of the hashing provider.
pub const DEFAULT_DIM: usize = 256;
pub const HASHED_PROVIDER_ID: &str = "hashed-fnv1a64";

const VECTOR_MAGIC: &[u8; 4] = b"AWEV";
const VECTOR_VERSION: u8 = 0x01;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("bad magic in vector file")]
    BadMagic,
    #[error("unsupported vector file version {0:#04x}")]
    UnknownVersion(u8),
    #[error("vector file truncated")]
    Truncated,
    #[error("vector file entity id is not valid UTF-8")]
    InvalidId,
    #[error("duplicate entity id {0:?} in vector file")]
    DuplicateId(String),
    #[error("entity id longer than 65535 bytes: {0:?}")]
    IdTooLong(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A dense `f32` embedding.
///
/// Vectors produced by providers are unit-norm, or all zeros for text with
/// no tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        EmbeddingVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// Rescales to unit norm. Zero vectors and vectors already within 1e-6
    /// of unit norm are returned unchanged, so a stored unit vector survives
    /// a load bit-for-bit.
    pub fn normalized(self) -> Self {
        let norm = self.norm();
        if norm == 0.0 || (norm - 1.0).abs() <= 1e-6 {
            return self;
        }
        EmbeddingVector(self.0.into_iter().map(|x| (x as f64 / norm) as f32).collect())
    }
}

/// Cosine similarity, or 0 when either side is the zero vector.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(cosine_unchecked(a.values(), b.values()))
}

pub(crate) fn cosine_unchecked(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Something that turns text into vectors of a fixed dimension.
pub trait Embedder: Send + Sync {
    fn provider_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
}

/// Signed feature hashing over lowercase alphanumeric tokens.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    /// # Panics
    /// If `dim` is zero.
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_DIM)
    }
}

impl Embedder for HashingEmbedder {
    fn provider_id(&self) -> &str {
        HASHED_PROVIDER_ID
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        hashed_embed(text, self.dim)
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(|t| t.to_lowercase())
}

pub fn hashed_embed(text: &str, dim: usize) -> EmbeddingVector {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut acc = vec![0.0f64; dim];
    for token in tokenize(text) {
        let h = fnv1a64(token.as_bytes());
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[(h % dim as u64) as usize] += sign;
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return EmbeddingVector::zeros(dim);
    }
    EmbeddingVector(acc.into_iter().map(|x| (x / norm) as f32).collect())
}

/// Raw contents of a vector file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub dim: usize,
    pub records: Vec<(String, EmbeddingVector)>,
}

impl VectorFile {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), EmbedError> {
        out.write_all(VECTOR_MAGIC)?;
        out.write_all(&[VECTOR_VERSION])?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for (id, v) in &self.records {
            if v.dim() != self.dim {
                return Err(EmbedError::DimMismatch { expected: self.dim, found: v.dim() });
            }
            let len = u16::try_from(id.len()).map_err(|_| EmbedError::IdTooLong(id.clone()))?;
            out.write_all(&len.to_le_bytes())?;
            out.write_all(id.as_bytes())?;
            for &x in v.values() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, EmbedError> {
        let mut magic = [0u8; 4];
        read_exact(&mut input, &mut magic)?;
        if &magic != VECTOR_MAGIC {
            return Err(EmbedError::BadMagic);
        }
        let mut version = [0u8; 1];
        read_exact(&mut input, &mut version)?;
        if version[0] != VECTOR_VERSION {
            return Err(EmbedError::UnknownVersion(version[0]));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        read_exact(&mut input, &mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        read_exact(&mut input, &mut b8)?;
        let count = u64::from_le_bytes(b8);
        let mut records = Vec::new();
        for _ in 0..count {
            let mut b2 = [0u8; 2];
            read_exact(&mut input, &mut b2)?;
            let mut id = vec![0u8; u16::from_le_bytes(b2) as usize];
            read_exact(&mut input, &mut id)?;
            let id = String::from_utf8(id).map_err(|_| EmbedError::InvalidId)?;
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                read_exact(&mut input, &mut b4)?;
                values.push(f32::from_le_bytes(b4));
            }
            records.push((id, EmbeddingVector(values)));
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            log::warn!("vector file has trailing bytes after {count} records");
        }
        Ok(VectorFile { dim, records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        VectorFile::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<(), EmbedError> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => EmbedError::Truncated,
        _ => EmbedError::Io(e),
    })
}

/// Loads a vector file, checking its dimension and renormalizing every
/// non-zero vector to unit length.
pub fn load_vectors(
    path: impl AsRef<Path>,
    expected_dim: usize,
) -> Result<BTreeMap<String, EmbeddingVector>, EmbedError> {
    vectors_from_file(VectorFile::open(path)?, expected_dim)
}

pub fn vectors_from_file(
    file: VectorFile,
    expected_dim: usize,
) -> Result<BTreeMap<String, EmbeddingVector>, EmbedError> {
    if file.dim != expected_dim {
        return Err(EmbedError::DimMismatch { expected: expected_dim, found: file.dim });
    }
    let mut map = BTreeMap::new();
    for (id, v) in file.records {
        if map.contains_key(&id) {
            return Err(EmbedError::DuplicateId(id));
        }
        map.insert(id, v.normalized());
    }
    log::info!("loaded {} vectors of dim {}", map.len(), expected_dim);
    Ok(map)
}
