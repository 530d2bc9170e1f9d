//! Differential anomaly detection for face-swap video forensics.
//!
//! Real face frames are turned into self-blended pseudo-fakes, embedded,
//! fused pairwise, and scored under a Gaussian mixture fitted only on pairs
//! of real frames from the same video.

pub mod diffcomb;
pub mod eval;
pub mod features;
pub mod geom;
pub mod gmm;
pub mod manifest_io;
pub mod mask;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod synthetic;
