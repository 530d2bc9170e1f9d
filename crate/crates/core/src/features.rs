//! Frame embeddings: a built-in toy extractor and loading of externally
//! computed stores.
//!
//! Toy layout (448 values). For cell `(cx, cy)` of the 8x8 grid of 28x28
//! cells and channel `c`, index `((cy * 8 + cx) * 3 + c) * 2` holds the mean
//! and the next index the population standard deviation of the normalized
//! channel. Index `384 + cy * 8 + cx` holds the mean absolute 4-neighbour
//! Laplacian of normalized grayscale (0.299 R + 0.587 G + 0.114 B) over the
//! cell, with replicated borders.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::manifest_io::manifest::resolve;
use crate::manifest_io::{load_landmarks, read_embeddings, Embedding, EmbeddingError, EmbeddingStore, LandmarkError, VideoRecord};
use crate::synth::{prepare_frame, FaceImage, SynthError, FACE_SIZE};

pub const TOY_DIM: usize = 448;
pub const GRID: usize = 8;
pub const CELL: usize = FACE_SIZE / GRID;
/// Per-channel normalization applied at extractor input.
pub const NORM_MEAN: f64 = 0.5;
pub const NORM_STD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("extractor input must be {FACE_SIZE}x{FACE_SIZE}, got {width}x{height}")]
    Dimensions { width: usize, height: usize },
    #[error(transparent)]
    Image(#[from] SynthError),
    #[error("video `{video_id}`: {source}")]
    Landmarks {
        video_id: String,
        #[source]
        source: LandmarkError,
    },
    #[error("no embedding for video `{video_id}` frame {frame}")]
    MissingFrame { video_id: String, frame: u32 },
    #[error("embedding dim {found} does not match the expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractorKind {
    Toy,
    /// Embeddings precomputed by an outside tool, read from this file.
    External(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorSpec {
    pub kind: ExtractorKind,
    /// Expected embedding length. `None` accepts whatever an external file
    /// declares.
    pub dim: Option<usize>,
}

impl ExtractorSpec {
    pub fn toy() -> Self {
        Self { kind: ExtractorKind::Toy, dim: Some(TOY_DIM) }
    }

    pub fn external(path: impl Into<PathBuf>, dim: Option<usize>) -> Self {
        Self { kind: ExtractorKind::External(path.into()), dim }
    }
}

pub fn normalize(v: f32) -> f64 {
    (f64::from(v) / 255.0 - NORM_MEAN) / NORM_STD
}

/// Toy embedding of a 224x224 face crop.
pub fn toy_extract(image: &FaceImage) -> Result<Embedding, FeatureError> {
    let (w, h) = (image.width(), image.height());
    if w != FACE_SIZE || h != FACE_SIZE {
        return Err(FeatureError::Dimensions { width: w, height: h });
    }
    let norm: Vec<f64> = image.data().iter().map(|&v| normalize(v)).collect();
    let gray: Vec<f64> = norm.chunks_exact(3).map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect();
    let g = |x: isize, y: isize| {
        let xx = x.clamp(0, w as isize - 1) as usize;
        let yy = y.clamp(0, h as isize - 1) as usize;
        gray[yy * w + xx]
    };

    let mut out = vec![0.0f32; TOY_DIM];
    let n = (CELL * CELL) as f64;
    for cy in 0..GRID {
        for cx in 0..GRID {
            let cell = cy * GRID + cx;
            let pixels = || {
                (cy * CELL..(cy + 1) * CELL).flat_map(move |y| (cx * CELL..(cx + 1) * CELL).map(move |x| y * w + x))
            };
            for c in 0..3 {
                // Shifted by the first value so constant cells are exact.
                let first = norm[(cy * CELL * w + cx * CELL) * 3 + c];
                let mean = first + pixels().map(|i| norm[i * 3 + c] - first).sum::<f64>() / n;
                let var = pixels().map(|i| (norm[i * 3 + c] - mean).powi(2)).sum::<f64>() / n;
                out[(cell * 3 + c) * 2] = mean as f32;
                out[(cell * 3 + c) * 2 + 1] = var.sqrt() as f32;
            }
            let lap: f64 = pixels()
                .map(|i| {
                    let (x, y) = ((i % w) as isize, (i / w) as isize);
                    let c = g(x, y);
                    ((c - g(x - 1, y)) + (c - g(x + 1, y)) + (c - g(x, y - 1)) + (c - g(x, y + 1))).abs()
                })
                .sum();
            out[GRID * GRID * 6 + cell] = (lap / n) as f32;
        }
    }
    Ok(Embedding::new(out)?)
}

/// Toy embeddings for every frame of every record. Relative paths are
/// resolved against `base`; frames that are not 224x224 are cropped around
/// their landmarks first.
pub fn extract_all(records: &[VideoRecord], base: &Path, spec: &ExtractorSpec) -> Result<EmbeddingStore, FeatureError> {
    match &spec.kind {
        ExtractorKind::Toy => {
            if let Some(d) = spec.dim.filter(|&d| d != TOY_DIM) {
                return Err(FeatureError::DimMismatch { expected: d, found: TOY_DIM });
            }
            extract_toy(records, base)
        }
        ExtractorKind::External(path) => {
            let store = read_embeddings(&resolve(base, path))?;
            validate_store(&store, records, spec.dim)?;
            Ok(store)
        }
    }
}

fn extract_toy(records: &[VideoRecord], base: &Path) -> Result<EmbeddingStore, FeatureError> {
    let mut store = EmbeddingStore::new(TOY_DIM)?;
    for record in records {
        let landmarks = load_landmarks(&resolve(base, &record.landmark_path), record.n_frames())
            .map_err(|source| FeatureError::Landmarks { video_id: record.video_id.clone(), source })?;
        let embeddings: Vec<Embedding> = record
            .frame_paths
            .par_iter()
            .zip(landmarks.par_iter())
            .map(|(p, lm)| {
                let raw = FaceImage::load(&resolve(base, p))?;
                let (face, _) = prepare_frame(&raw, lm)?;
                toy_extract(&face)
            })
            .collect::<Result<_, _>>()?;
        log::debug!("extracted {} frames of `{}`", embeddings.len(), record.video_id);
        for (i, e) in embeddings.into_iter().enumerate() {
            store.insert(record.video_id.clone(), i as u32, e)?;
        }
    }
    Ok(store)
}

/// Checks a store covers every frame of `records` and has the expected dim.
pub fn validate_store(store: &EmbeddingStore, records: &[VideoRecord], dim: Option<usize>) -> Result<(), FeatureError> {
    if let Some(d) = dim.filter(|&d| d != store.dim()) {
        return Err(FeatureError::DimMismatch { expected: d, found: store.dim() });
    }
    for r in records {
        for f in 0..r.n_frames() as u32 {
            if !store.contains(&r.video_id, f) {
                return Err(FeatureError::MissingFrame { video_id: r.video_id.clone(), frame: f });
            }
        }
    }
    Ok(())
}
