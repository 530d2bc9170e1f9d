//! Pseudo-fake synthesis from a single real face.
//!
//! Source and target are both copies of the same real frame. Color and
//! frequency transforms go to either copy, the source is jittered by a small
//! affine warp, and the two are blended through a landmark mask.

mod image;
pub mod preprocess;
pub mod transforms;
pub mod warp;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

use crate::geom::BBox;
use crate::manifest_io::LandmarkSet;
use crate::mask::{build_mask, BlendMask, MaskError, MaskParams, MaskScheme, BLEND_RATIOS};
use crate::rng::{derive_seed, derive_seed_n, rng_from};

pub use image::{FaceImage, FACE_SIZE};
pub use preprocess::{crop_box, preprocess, CropBox, DEFAULT_ENLARGE};
pub use transforms::{affine_source, apply_st_transforms, AffineParams, Recipient, TransformConfig, TransformOp};

/// Binary label of an untouched real frame.
pub const LABEL_REAL: u8 = 0;
/// Binary label of a pseudo-fake.
pub const LABEL_PSEUDO_FAKE: u8 = 1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad image dimensions: {0}")]
    Dimensions(String),
    #[error("pixel value {value} at index {index} outside [0, 255]")]
    PixelRange { index: usize, value: f32 },
    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid transform config: {0}")]
    Config(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// `source * M + target * (1 - M)` per channel, evaluated as
/// `target + M * (source - target)` in `f64`.
pub fn blend(source: &FaceImage, target: &FaceImage, mask: &BlendMask) -> Result<FaceImage, SynthError> {
    if !source.same_shape(target) || mask.width() != source.width() || mask.height() != source.height() {
        return Err(SynthError::DimensionMismatch(format!(
            "source {}x{}, target {}x{}, mask {}x{}",
            source.width(),
            source.height(),
            target.width(),
            target.height(),
            mask.width(),
            mask.height()
        )));
    }
    let m = mask.values();
    let data = source
        .data()
        .iter()
        .zip(target.data())
        .enumerate()
        .map(|(i, (&s, &t))| {
            let (s, t) = (f64::from(s), f64::from(t));
            (t + m[i / 3] * (s - t)) as f32
        })
        .collect();
    Ok(FaceImage::from_raw_clamped(source.width(), source.height(), data))
}

/// Which copy a fired transform was applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedTransform {
    pub side: Side,
    #[serde(flatten)]
    pub op: TransformOp,
}

/// Everything needed to regenerate a pseudo-fake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub video_id: Option<String>,
    pub frame_index: Option<u32>,
    pub seed: u64,
    pub scheme: MaskScheme,
    pub blend_ratio: f64,
    pub transforms: Vec<AppliedTransform>,
    pub affine: AffineParams,
    pub label: u8,
}

#[derive(Debug, Clone)]
pub struct PseudoDeepfake {
    pub image: FaceImage,
    pub mask_used: BlendMask,
    pub scheme: MaskScheme,
    pub provenance: Provenance,
}

/// Builds a pseudo-fake with the default mask parameters.
pub fn make_pseudo_deepfake(
    real: &FaceImage,
    landmarks: &LandmarkSet,
    scheme: MaskScheme,
    cfg: &TransformConfig,
    seed: u64,
) -> Result<PseudoDeepfake, SynthError> {
    make_pseudo_deepfake_with(real, landmarks, scheme, cfg, &MaskParams::default(), seed)
}

pub fn make_pseudo_deepfake_with(
    real: &FaceImage,
    landmarks: &LandmarkSet,
    scheme: MaskScheme,
    cfg: &TransformConfig,
    mask_params: &MaskParams,
    seed: u64,
) -> Result<PseudoDeepfake, SynthError> {
    cfg.validate()?;
    let mut rng = rng_from(derive_seed(seed, "transforms"));
    let ops = transforms::sample_ops(cfg, &mut rng, cfg.force_one);
    let mut applied = Vec::with_capacity(ops.len());
    let (mut source, mut target) = (real.clone(), real.clone());
    for op in ops {
        let side = match cfg.recipient {
            Recipient::Source => Side::Source,
            Recipient::Target => Side::Target,
            Recipient::Random if rng.gen::<bool>() => Side::Source,
            Recipient::Random => Side::Target,
        };
        match side {
            Side::Source => source = op.apply(&source),
            Side::Target => target = op.apply(&target),
        }
        applied.push(AppliedTransform { side, op });
    }
    let affine = AffineParams::sample(cfg, real.width(), real.height(), &mut rng);
    let source = affine.apply(&source);
    let blend_ratio = BLEND_RATIOS[rng.gen_range(0..BLEND_RATIOS.len())];
    let mask = build_mask(
        scheme,
        landmarks,
        real.width(),
        real.height(),
        mask_params,
        blend_ratio,
        derive_seed(seed, "mask"),
    )?;
    let image = blend(&source, &target, &mask)?;
    Ok(PseudoDeepfake {
        image,
        mask_used: mask,
        scheme,
        provenance: Provenance {
            video_id: None,
            frame_index: None,
            seed,
            scheme,
            blend_ratio,
            transforms: applied,
            affine,
            label: LABEL_PSEUDO_FAKE,
        },
    })
}

/// A fixed mask scheme, or a uniformly random one per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Fixed(MaskScheme),
    Random,
}

impl SchemeChoice {
    pub fn pick(self, seed: u64) -> MaskScheme {
        match self {
            SchemeChoice::Fixed(s) => s,
            SchemeChoice::Random => MaskScheme::ALL[rng_from(seed).gen_range(0..MaskScheme::ALL.len())],
        }
    }
}

impl FromStr for SchemeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            Ok(SchemeChoice::Random)
        } else {
            s.parse().map(SchemeChoice::Fixed)
        }
    }
}

impl fmt::Display for SchemeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeChoice::Fixed(s) => s.fmt(f),
            SchemeChoice::Random => f.write_str("all"),
        }
    }
}

/// Brings a frame to the 224x224 working size. Frames already at that size
/// pass through untouched; others are cropped around the landmark bounding
/// box enlarged by [`DEFAULT_ENLARGE`].
pub fn prepare_frame(raw: &FaceImage, landmarks: &LandmarkSet) -> Result<(FaceImage, LandmarkSet), SynthError> {
    if raw.width() == FACE_SIZE && raw.height() == FACE_SIZE {
        return Ok((raw.clone(), landmarks.clone()));
    }
    let pts = landmarks.points();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    preprocess(raw, &BBox::new(x0, y0, x1 - x0, y1 - y0), landmarks, DEFAULT_ENLARGE)
}

/// `count` pseudo-fakes for every frame of one video. Output is ordered by
/// frame, then sample; sample `k` of frame `f` uses a seed derived from
/// `(seed, video_id, f, k)` so results do not depend on scheduling.
pub fn synthesize_video(
    video_id: &str,
    frames: &[(FaceImage, LandmarkSet)],
    scheme: SchemeChoice,
    cfg: &TransformConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<PseudoDeepfake>, SynthError> {
    let video_seed = derive_seed(seed, video_id);
    let jobs: Vec<(usize, usize)> = (0..frames.len()).flat_map(|f| (0..count).map(move |k| (f, k))).collect();
    jobs.par_iter()
        .map(|&(f, k)| {
            let s = derive_seed_n(derive_seed_n(video_seed, f as u64), k as u64);
            let (img, lm) = &frames[f];
            let mut pf = make_pseudo_deepfake(img, lm, scheme.pick(derive_seed(s, "scheme")), cfg, s)?;
            pf.provenance.video_id = Some(video_id.to_string());
            pf.provenance.frame_index = Some(f as u32);
            Ok(pf)
        })
        .collect()
}
