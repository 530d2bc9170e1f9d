//! Source-target color and frequency perturbations, and the source-only
//! affine jitter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::warp::{affine_warp, resize_bilinear};
use super::{FaceImage, SynthError};
use crate::rng::{rng_from, DetRng};

/// Which image of the (source, target) pair receives a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipient {
    Source,
    Target,
    /// Fair coin per transform.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    /// Per-channel additive shift, in 8-bit units.
    pub rgb_shift_range: (f64, f64),
    /// Hue (fraction of the hue circle), saturation and value shifts, each
    /// on a [0, 1] scale.
    pub hsv_shift_range: (f64, f64),
    /// Range for both the brightness offset (fraction of 255) and the
    /// contrast gain offset.
    pub brightness_contrast_limit: (f64, f64),
    /// Blend weight between the identity and a 3x3 sharpening kernel.
    pub sharpen_intensity: (f64, f64),
    pub downscale_factors: Vec<u32>,
    /// Source translation, as a fraction of the image side, drawn from
    /// `[-frac, frac]` per axis.
    pub affine_translate_frac: f64,
    /// Source rescale drawn from `[1 - frac, 1 + frac]`.
    pub affine_resize_frac: f64,
    /// Firing probability of each transform, in [`TransformKind::ALL`] order.
    pub probabilities: [f64; 5],
    pub recipient: Recipient,
    /// Force one transform (among those with non-zero probability) when
    /// none fired on their own.
    pub force_one: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            rgb_shift_range: (-20.0, 20.0),
            hsv_shift_range: (-0.3, 0.3),
            brightness_contrast_limit: (-0.3, 0.3),
            sharpen_intensity: (0.2, 0.5),
            downscale_factors: vec![2, 4],
            affine_translate_frac: 0.03,
            affine_resize_frac: 0.05,
            probabilities: [0.3; 5],
            recipient: Recipient::Random,
            force_one: true,
        }
    }
}

impl TransformConfig {
    /// A config under which the synthesis path changes nothing.
    pub fn identity() -> Self {
        Self {
            affine_translate_frac: 0.0,
            affine_resize_frac: 0.0,
            probabilities: [0.0; 5],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        for (name, (lo, hi)) in [
            ("rgb_shift_range", self.rgb_shift_range),
            ("hsv_shift_range", self.hsv_shift_range),
            ("brightness_contrast_limit", self.brightness_contrast_limit),
            ("sharpen_intensity", self.sharpen_intensity),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name}: invalid range ({lo}, {hi})"));
            }
        }
        if !(0.0..=1.0).contains(&self.sharpen_intensity.0) || !(0.0..=1.0).contains(&self.sharpen_intensity.1) {
            return bad("sharpen_intensity must lie in [0, 1]".into());
        }
        if self.downscale_factors.is_empty() || self.downscale_factors.contains(&0) {
            return bad("downscale_factors must be non-empty and positive".into());
        }
        if !(0.0..0.5).contains(&self.affine_translate_frac) || !(0.0..1.0).contains(&self.affine_resize_frac) {
            return bad("affine fractions out of range".into());
        }
        if let Some(p) = self.probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("probability {p} outside [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    RgbShift,
    HsvShift,
    BrightnessContrast,
    Sharpen,
    Downscale,
}

impl TransformKind {
    pub const ALL: [TransformKind; 5] = [
        TransformKind::RgbShift,
        TransformKind::HsvShift,
        TransformKind::BrightnessContrast,
        TransformKind::Sharpen,
        TransformKind::Downscale,
    ];
}

/// A transform with its sampled parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TransformOp {
    RgbShift { shift: [f64; 3] },
    HsvShift { hue: f64, saturation: f64, value: f64 },
    BrightnessContrast { brightness: f64, contrast: f64 },
    Sharpen { alpha: f64 },
    Downscale { factor: u32 },
}

impl TransformOp {
    pub fn sample(kind: TransformKind, cfg: &TransformConfig, rng: &mut DetRng) -> Self {
        let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        match kind {
            TransformKind::RgbShift => {
                let r = cfg.rgb_shift_range;
                TransformOp::RgbShift { shift: [draw(r), draw(r), draw(r)] }
            }
            TransformKind::HsvShift => {
                let r = cfg.hsv_shift_range;
                TransformOp::HsvShift { hue: draw(r), saturation: draw(r), value: draw(r) }
            }
            TransformKind::BrightnessContrast => {
                let r = cfg.brightness_contrast_limit;
                TransformOp::BrightnessContrast { brightness: draw(r), contrast: draw(r) }
            }
            TransformKind::Sharpen => TransformOp::Sharpen { alpha: draw(cfg.sharpen_intensity) },
            TransformKind::Downscale => {
                let i = rng.gen_range(0..cfg.downscale_factors.len());
                TransformOp::Downscale { factor: cfg.downscale_factors[i] }
            }
        }
    }

    pub fn apply(&self, img: &FaceImage) -> FaceImage {
        match *self {
            TransformOp::RgbShift { shift } => rgb_shift(img, shift),
            TransformOp::HsvShift { hue, saturation, value } => hsv_shift(img, hue, saturation, value),
            TransformOp::BrightnessContrast { brightness, contrast } => {
                brightness_contrast(img, brightness, contrast)
            }
            TransformOp::Sharpen { alpha } => sharpen(img, alpha),
            TransformOp::Downscale { factor } => downscale(img, factor),
        }
    }
}

pub fn rgb_shift(img: &FaceImage, shift: [f64; 3]) -> FaceImage {
    let mut data = img.data().to_vec();
    for (i, v) in data.iter_mut().enumerate() {
        *v = (f64::from(*v) + shift[i % 3]) as f32;
    }
    FaceImage::from_raw_clamped(img.width(), img.height(), data)
}

/// RGB in [0, 1] to (h, s, v), `h` in [0, 1).
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    [h.rem_euclid(1.0), s, max]
}

pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as i64).rem_euclid(6);
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Shifts hue (wrapping), saturation and value (clamped) in HSV space.
pub fn hsv_shift(img: &FaceImage, hue: f64, saturation: f64, value: f64) -> FaceImage {
    let mut data = img.data().to_vec();
    for px in data.chunks_exact_mut(3) {
        let rgb = [px[0], px[1], px[2]].map(|v| f64::from(v) / 255.0);
        let [h, s, v] = rgb_to_hsv(rgb);
        let shifted = [
            (h + hue).rem_euclid(1.0),
            (s + saturation).clamp(0.0, 1.0),
            (v + value).clamp(0.0, 1.0),
        ];
        for (o, c) in px.iter_mut().zip(hsv_to_rgb(shifted)) {
            *o = (c * 255.0) as f32;
        }
    }
    FaceImage::from_raw_clamped(img.width(), img.height(), data)
}

/// `out = (1 + contrast) * v + brightness * 255`.
pub fn brightness_contrast(img: &FaceImage, brightness: f64, contrast: f64) -> FaceImage {
    let (gain, offset) = (1.0 + contrast, brightness * 255.0);
    img.map_values(|v| (gain * f64::from(v) + offset) as f32)
}

/// Convolves with `(1 - alpha) * identity + alpha * K`, where `K` has 9 at
/// the center and -1 on the 8 neighbours.
pub fn sharpen(img: &FaceImage, alpha: f64) -> FaceImage {
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let at = |x: isize, y: isize, c: usize| {
        let xx = x.clamp(0, w as isize - 1) as usize;
        let yy = y.clamp(0, h as isize - 1) as usize;
        f64::from(src[(yy * w + xx) * 3 + c])
    };
    let mut data = Vec::with_capacity(src.len());
    for y in 0..h as isize {
        for x in 0..w as isize {
            for c in 0..3 {
                let center = at(x, y, c);
                let mut ring = 0.0;
                for (dx, dy) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                    ring += at(x + dx, y + dy, c);
                }
                let sharpened = 9.0 * center - ring;
                data.push(((1.0 - alpha) * center + alpha * sharpened) as f32);
            }
        }
    }
    FaceImage::from_raw_clamped(w, h, data)
}

/// Downsamples by `factor` and resizes back to the original size.
pub fn downscale(img: &FaceImage, factor: u32) -> FaceImage {
    let f = factor.max(1) as usize;
    let small = resize_bilinear(img, (img.width() / f).max(1), (img.height() / f).max(1));
    resize_bilinear(&small, img.width(), img.height())
}

/// Independently fires each transform with its probability and applies
/// the fired ones, in [`TransformKind::ALL`] order, to `image`.
pub fn apply_st_transforms(image: &FaceImage, cfg: &TransformConfig, seed: u64) -> Result<FaceImage, SynthError> {
    cfg.validate()?;
    let mut rng = rng_from(seed);
    let ops = sample_ops(cfg, &mut rng, false);
    Ok(ops.iter().fold(image.clone(), |img, op| op.apply(&img)))
}

/// Draws which transforms fire and their parameters.
pub(crate) fn sample_ops(cfg: &TransformConfig, rng: &mut DetRng, force_one: bool) -> Vec<TransformOp> {
    let mut fired: Vec<bool> = cfg.probabilities.iter().map(|&p| rng.gen::<f64>() < p).collect();
    if force_one && !fired.iter().any(|&f| f) {
        let eligible: Vec<usize> = (0..5).filter(|&i| cfg.probabilities[i] > 0.0).collect();
        if !eligible.is_empty() {
            fired[eligible[rng.gen_range(0..eligible.len())]] = true;
        }
    }
    TransformKind::ALL
        .iter()
        .zip(fired)
        .filter(|(_, f)| *f)
        .map(|(&kind, _)| TransformOp::sample(kind, cfg, rng))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub tx: f64,
    pub ty: f64,
    pub scale: f64,
}

impl AffineParams {
    pub fn sample(cfg: &TransformConfig, width: usize, height: usize, rng: &mut DetRng) -> Self {
        let mut sym = |half: f64| if half == 0.0 { 0.0 } else { rng.gen_range(-half..=half) };
        let tx = sym(cfg.affine_translate_frac) * width as f64;
        let ty = sym(cfg.affine_translate_frac) * height as f64;
        let scale = 1.0 + sym(cfg.affine_resize_frac);
        Self { tx, ty, scale }
    }

    pub fn apply(&self, img: &FaceImage) -> FaceImage {
        affine_warp(img, self.tx, self.ty, self.scale)
    }
}

/// Random translation then rescale of the source image.
pub fn affine_source(image: &FaceImage, cfg: &TransformConfig, seed: u64) -> Result<FaceImage, SynthError> {
    cfg.validate()?;
    let mut rng = rng_from(seed);
    Ok(AffineParams::sample(cfg, image.width(), image.height(), &mut rng).apply(image))
}
