use std::path::Path;

use super::SynthError;

/// Side length of preprocessed face crops.
pub const FACE_SIZE: usize = 224;

/// RGB image with `f32` channel values in [0, 255], row-major, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FaceImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, SynthError> {
        if data.len() != width * height * 3 {
            return Err(SynthError::Dimensions(format!(
                "buffer of {} values for a {width}x{height} RGB image",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=255.0).contains(v)) {
            return Err(SynthError::PixelRange { index: i, value: data[i] });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data).expect("fill color must lie in [0, 255]")
    }

    /// Builds an image from a per-pixel function; values are clamped.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y).map(|v| v.clamp(0.0, 255.0)));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        for c in 0..3 {
            self.data[i + c] = rgb[c].clamp(0.0, 255.0);
        }
    }

    pub fn same_shape(&self, other: &FaceImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Applies `f` to every channel value and clamps into [0, 255].
    pub(crate) fn map_values(&self, f: impl Fn(f32) -> f32) -> FaceImage {
        let data = self.data.iter().map(|&v| f(v).clamp(0.0, 255.0)).collect();
        FaceImage { width: self.width, height: self.height, data }
    }

    pub(crate) fn from_raw_clamped(width: usize, height: usize, mut data: Vec<f32>) -> FaceImage {
        data.iter_mut().for_each(|v| *v = v.clamp(0.0, 255.0));
        FaceImage { width, height, data }
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let data = img.as_raw().iter().map(|&v| f32::from(v)).collect();
        Self { width: img.width() as usize, height: img.height() as usize, data }
    }

    /// Rounds to the nearest 8-bit value.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let raw = self.data.iter().map(|v| v.round() as u8).collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer size")
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let img = image::open(path).map_err(|e| SynthError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<(), SynthError> {
        self.to_rgb8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| SynthError::Image { path: path.to_path_buf(), message: e.to_string() })
    }
}
