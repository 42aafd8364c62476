//! Versioned binary checkpoint container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"SEMCKPT\0"
//! 8       4     format version, u32 little-endian (currently 1)
//! 12      8     header length H, u64 little-endian
//! 20      H     UTF-8 JSON header
//! 20+H    D     tensor data, f32 little-endian, tensors back to back
//! end-32  32    SHA-256 of every preceding byte
//! ```
//!
//! The header lists the autoencoder spec, the dtype, each tensor's name,
//! shape, byte offset into the data section and element count, and the
//! training provenance (resolved config, loss trace, dataset digest).

use std::path::Path;

use semcomm_core::nn::{AutoencoderSpec, Parameters, Tensor};
use semcomm_core::sampling::SubsetSpec;
use semcomm_core::train::{LossTrace, TrainingConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fsutil::write_atomic;

pub const MAGIC: [u8; 8] = *b"SEMCKPT\0";
pub const FORMAT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 8 + 4 + 8;
const DIGEST_LEN: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {found} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("checkpoint is truncated: need {needed} bytes, have {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("checkpoint is corrupt: content digest does not match")]
    Corrupt,
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint tensor table: {0}")]
    Layout(String),
    #[error("checkpoint was written for a different model spec")]
    SpecMismatch { expected: Box<AutoencoderSpec>, found: Box<AutoencoderSpec> },
    #[error(transparent)]
    Params(#[from] semcomm_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the data section.
    pub offset: u64,
    /// Number of elements.
    pub len: u64,
}

/// How a set of parameters came to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub training: TrainingConfig,
    pub subset: Option<SubsetSpec>,
    pub dataset_md5: Option<String>,
    pub trace: LossTrace,
    pub tool_version: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    spec: AutoencoderSpec,
    dtype: String,
    tensors: Vec<TensorEntry>,
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub params: Parameters<f32>,
    pub provenance: Provenance,
}

fn read_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4 bytes"))
}

fn read_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().expect("8 bytes"))
}

impl ModelCheckpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        let mut tensors = Vec::new();
        let mut offset = 0u64;
        for t in self.params.tensors() {
            tensors.push(TensorEntry { name: t.name.clone(), shape: t.shape.clone(), offset, len: t.data.len() as u64 });
            offset += 4 * t.data.len() as u64;
        }
        let header = Header {
            spec: self.params.spec().clone(),
            dtype: "f32".into(),
            tensors,
            provenance: self.provenance.clone(),
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(PREFIX_LEN + header.len() + offset as usize + DIGEST_LEN);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.params.tensors() {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let truncated = |needed: usize| CheckpointError::Truncated { needed: needed as u64, available: bytes.len() as u64 };
        if bytes.len() < 8 || bytes[..8] != MAGIC {
            return Err(if bytes.len() < 8 && MAGIC.starts_with(bytes) { truncated(8) } else { CheckpointError::BadMagic });
        }
        if bytes.len() < PREFIX_LEN {
            return Err(truncated(PREFIX_LEN));
        }
        let version = read_u32(&bytes[8..12]);
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion { found: version });
        }
        let header_len = usize::try_from(read_u64(&bytes[12..20])).map_err(|_| CheckpointError::Corrupt)?;
        let data_start = PREFIX_LEN.checked_add(header_len).ok_or(CheckpointError::Corrupt)?;
        if bytes.len() < data_start + DIGEST_LEN {
            return Err(truncated(data_start + DIGEST_LEN));
        }
        let header: Header = serde_json::from_slice(&bytes[PREFIX_LEN..data_start])?;
        let data_len: u64 = header.tensors.iter().map(|t| 4 * t.len).sum();
        let needed = data_start + data_len as usize + DIGEST_LEN;
        if bytes.len() < needed {
            return Err(truncated(needed));
        }
        if bytes.len() > needed {
            return Err(CheckpointError::Layout(format!("{} trailing bytes", bytes.len() - needed)));
        }
        let body = &bytes[..needed - DIGEST_LEN];
        if Sha256::digest(body).as_slice() != &bytes[needed - DIGEST_LEN..] {
            return Err(CheckpointError::Corrupt);
        }
        if header.dtype != "f32" {
            return Err(CheckpointError::Layout(format!("unsupported dtype {}", header.dtype)));
        }
        let data = &bytes[data_start..needed - DIGEST_LEN];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        let mut expected_offset = 0u64;
        for entry in header.tensors {
            if entry.offset != expected_offset || entry.shape.iter().product::<usize>() as u64 != entry.len {
                return Err(CheckpointError::Layout(format!("tensor {} has inconsistent offset or shape", entry.name)));
            }
            let start = entry.offset as usize;
            let values = data[start..start + 4 * entry.len as usize]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            expected_offset += 4 * entry.len;
            tensors.push(Tensor { name: entry.name, shape: entry.shape, data: values });
        }
        let params = Parameters::from_tensors(&header.spec, tensors)?;
        Ok(ModelCheckpoint { params, provenance: header.provenance })
    }

    pub fn save(&self, path: &Path) -> Result<String, CheckpointError> {
        let bytes = self.to_bytes()?;
        write_atomic(path, &bytes).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes =
            std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }

    /// Error unless the checkpoint was trained for `spec`.
    pub fn ensure_spec(&self, spec: &AutoencoderSpec) -> Result<(), CheckpointError> {
        if self.params.spec() != spec {
            return Err(CheckpointError::SpecMismatch {
                expected: Box::new(spec.clone()),
                found: Box::new(self.params.spec().clone()),
            });
        }
        Ok(())
    }
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}
