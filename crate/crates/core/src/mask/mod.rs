//! Blending masks built from landmark subsets.
//!
//! A mask is the convex hull of one landmark subset, rasterized, warped by a
//! random elastic field, blurred, then scaled by a blend ratio. Deformation
//! runs before smoothing.

pub mod filter;
pub mod hull;
pub mod raster;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::manifest_io::LandmarkSet;

pub use filter::{elastic_deform, gaussian_smooth};
pub use hull::{convex_hull, GeometryError};
pub use raster::rasterize_hull;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Landmark subsets used to build masks (iBUG-68 indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskScheme {
    /// All 68 points.
    FullFace,
    /// Eyebrows 17-26 and eyes 36-47.
    EyeRegion,
    /// Lower jaw 4-12, mouth 48-67 and the nose apex 33.
    MouthNoseJaw,
    /// Jawline 0-16 and the lower nose 30-35.
    JawlineNose,
}

const FULL_FACE: [usize; 68] = {
    let mut a = [0; 68];
    let mut i = 0;
    while i < 68 {
        a[i] = i;
        i += 1;
    }
    a
};
const EYE_REGION: [usize; 22] = [
    17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 36, 37, 38, 39, 40, 41, 42, 43, 44, 45, 46, 47,
];
const MOUTH_NOSE_JAW: [usize; 30] = [
    4, 5, 6, 7, 8, 9, 10, 11, 12, 33, 48, 49, 50, 51, 52, 53, 54, 55, 56, 57, 58, 59, 60, 61, 62,
    63, 64, 65, 66, 67,
];
const JAWLINE_NOSE: [usize; 23] = [
    0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 30, 31, 32, 33, 34, 35,
];

impl MaskScheme {
    pub const ALL: [MaskScheme; 4] =
        [MaskScheme::FullFace, MaskScheme::EyeRegion, MaskScheme::MouthNoseJaw, MaskScheme::JawlineNose];

    /// Landmark indices of this scheme, ascending.
    pub fn indices(self) -> &'static [usize] {
        match self {
            MaskScheme::FullFace => &FULL_FACE,
            MaskScheme::EyeRegion => &EYE_REGION,
            MaskScheme::MouthNoseJaw => &MOUTH_NOSE_JAW,
            MaskScheme::JawlineNose => &JAWLINE_NOSE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MaskScheme::FullFace => "full-face",
            MaskScheme::EyeRegion => "eye-region",
            MaskScheme::MouthNoseJaw => "mouth-nose-jaw",
            MaskScheme::JawlineNose => "jawline-nose",
        }
    }
}

impl fmt::Display for MaskScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MaskScheme::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mask scheme `{s}`"))
    }
}

pub fn scheme_landmarks(scheme: MaskScheme, landmarks: &LandmarkSet) -> Vec<Point> {
    scheme.indices().iter().map(|&i| landmarks.get(i)).collect()
}

/// A `width` x `height` grid of blend weights in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendMask {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl BlendMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_values(width, height, vec![value; width * height])
    }

    /// Panics if `values.len() != width * height` or any value leaves [0, 1].
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "mask buffer size");
        assert!(values.iter().all(|v| (0.0..=1.0).contains(v)), "mask values must lie in [0, 1]");
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        assert!((0.0..=1.0).contains(&v));
        self.values[y * self.width + x] = v;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_gray_image(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([(self.get(x as usize, y as usize) * 255.0).round() as u8])
        })
    }
}

/// Scales every mask value by `ratio`, which must lie in (0, 1].
pub fn apply_blend_ratio(mask: &BlendMask, ratio: f64) -> Result<BlendMask, MaskError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(MaskError::InvalidParameter(format!("blend ratio must be in (0, 1], got {ratio}")));
    }
    let values = mask.values.iter().map(|v| v * ratio).collect();
    Ok(BlendMask::from_values(mask.width, mask.height, values))
}

/// Discrete blend ratios a pseudo-fake draws from.
pub const BLEND_RATIOS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    pub elastic_alpha: f64,
    pub elastic_sigma: f64,
    pub smooth_sigma: f64,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self { elastic_alpha: 50.0, elastic_sigma: 7.0, smooth_sigma: 5.0 }
    }
}

/// Hull -> rasterize -> elastic deform -> smooth -> blend ratio.
pub fn build_mask(
    scheme: MaskScheme,
    landmarks: &LandmarkSet,
    width: usize,
    height: usize,
    params: &MaskParams,
    ratio: f64,
    seed: u64,
) -> Result<BlendMask, MaskError> {
    let hull = convex_hull(&scheme_landmarks(scheme, landmarks))?;
    let raw = rasterize_hull(&hull, width, height);
    let deformed = elastic_deform(&raw, params.elastic_alpha, params.elastic_sigma, seed)?;
    let smooth = gaussian_smooth(&deformed, params.smooth_sigma)?;
    apply_blend_ratio(&smooth, ratio)
}
