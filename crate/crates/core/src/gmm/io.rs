//! Binary model files.
//!
//! Layout, little-endian: magic `DAGM`, version `u32`, `d: u32`, `N: u32`,
//! then `N` weights, `N * d` means and the covariances as `f64`. Version 1
//! stores `N * d` diagonal variances, version 2 stores `N` full `d * d`
//! row-major matrices. Fit metadata is not stored.

use std::path::Path;

use super::{Covariances, GmmError, GmmModel};

pub const MODEL_MAGIC: [u8; 4] = *b"DAGM";
const VERSION_DIAGONAL: u32 = 1;
const VERSION_FULL: u32 = 2;

impl GmmModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (version, covs) = match &self.covariances {
            Covariances::Diagonal(v) => (VERSION_DIAGONAL, v),
            Covariances::Full(c) => (VERSION_FULL, c),
        };
        let mut out = Vec::new();
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&version.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_components() as u32).to_le_bytes());
        let values = self.weights.iter().chain(self.means.iter().flatten()).chain(covs.iter().flatten());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GmmError> {
        if bytes.len() < 4 {
            return Err(GmmError::Truncated);
        }
        if bytes[..4] != MODEL_MAGIC {
            return Err(GmmError::BadMagic);
        }
        let mut pos = 4;
        let read_u32 = |pos: &mut usize| -> Result<u32, GmmError> {
            let b = bytes.get(*pos..*pos + 4).ok_or(GmmError::Truncated)?;
            *pos += 4;
            Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
        };
        let version = read_u32(&mut pos)?;
        let d = read_u32(&mut pos)? as usize;
        let n = read_u32(&mut pos)? as usize;
        let cov_len = match version {
            VERSION_DIAGONAL => d,
            VERSION_FULL => d.checked_mul(d).ok_or(GmmError::Truncated)?,
            v => return Err(GmmError::UnsupportedVersion(v)),
        };
        if d == 0 || n == 0 {
            return Err(GmmError::InvalidModel(format!("d = {d}, N = {n}")));
        }
        let count = n
            .checked_mul(1 + d + cov_len)
            .and_then(|c| c.checked_mul(8))
            .ok_or(GmmError::Truncated)?;
        let payload = &bytes[pos..];
        if payload.len() < count {
            return Err(GmmError::Truncated);
        }
        if payload.len() > count {
            return Err(GmmError::TrailingBytes(payload.len() - count));
        }
        let values: Vec<f64> =
            payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let weights = values[..n].to_vec();
        let means = values[n..n + n * d].chunks_exact(d).map(<[f64]>::to_vec).collect();
        let covs = values[n + n * d..].chunks_exact(cov_len).map(<[f64]>::to_vec).collect();
        let covs = if version == VERSION_DIAGONAL { Covariances::Diagonal(covs) } else { Covariances::Full(covs) };
        GmmModel::new(weights, means, covs)
    }
}

pub fn save_model(model: &GmmModel, path: &Path) -> Result<(), GmmError> {
    std::fs::write(path, model.to_bytes()).map_err(|source| GmmError::Io { path: path.to_path_buf(), source })
}

pub fn load_model(path: &Path) -> Result<GmmModel, GmmError> {
    let bytes = std::fs::read(path).map_err(|source| GmmError::Io { path: path.to_path_buf(), source })?;
    GmmModel::from_bytes(&bytes)
}
