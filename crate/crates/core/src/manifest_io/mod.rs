//! Dataset manifests, per-frame landmark files and embedding stores.

pub mod embeddings;
pub mod landmarks;
pub mod manifest;

pub use embeddings::{read_embeddings, write_embeddings, Embedding, EmbeddingError, EmbeddingStore};
pub use landmarks::{load_landmarks, write_landmarks, LandmarkError, LandmarkSet, LANDMARK_COUNT};
pub use manifest::{load_manifest, write_manifest, Label, ManifestError, Split, VideoRecord};
