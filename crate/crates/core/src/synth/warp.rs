//! Bilinear resampling. Pixel `i` sits at coordinate `i`; out-of-frame
//! reads replicate the nearest edge pixel.

use super::FaceImage;

/// Bilinear RGB sample at `(x, y)` with edge replication.
pub fn sample_rgb(img: &FaceImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = (img.width(), img.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let data = img.data();
    let at = |xx: usize, yy: usize, c: usize| f64::from(data[(yy * w + xx) * 3 + c]);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let top = at(x0, y0, c) + (at(x1, y0, c) - at(x0, y0, c)) * fx;
        let bottom = at(x0, y1, c) + (at(x1, y1, c) - at(x0, y1, c)) * fx;
        *o = top + (bottom - top) * fy;
    }
    out
}

/// Resamples the `src_w` x `src_h` region at `(x0, y0)` to `out_w` x `out_h`
/// using half-pixel-center alignment.
pub fn crop_resize(
    img: &FaceImage,
    x0: f64,
    y0: f64,
    src_w: f64,
    src_h: f64,
    out_w: usize,
    out_h: usize,
) -> FaceImage {
    let (sx, sy) = (src_w / out_w as f64, src_h / out_h as f64);
    let mut data = Vec::with_capacity(out_w * out_h * 3);
    for y in 0..out_h {
        let yy = y0 + (y as f64 + 0.5) * sy - 0.5;
        for x in 0..out_w {
            let xx = x0 + (x as f64 + 0.5) * sx - 0.5;
            data.extend(sample_rgb(img, xx, yy).map(|v| v as f32));
        }
    }
    FaceImage::from_raw_clamped(out_w, out_h, data)
}

pub fn resize_bilinear(img: &FaceImage, out_w: usize, out_h: usize) -> FaceImage {
    crop_resize(img, 0.0, 0.0, img.width() as f64, img.height() as f64, out_w, out_h)
}

/// Translates content by `(tx, ty)` pixels, then scales it by `scale` about
/// the image center. Output keeps the input size.
pub fn affine_warp(img: &FaceImage, tx: f64, ty: f64, scale: f64) -> FaceImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let sy = (y as f64 - cy) / scale + cy - ty;
        for x in 0..w {
            let sx = (x as f64 - cx) / scale + cx - tx;
            data.extend(sample_rgb(img, sx, sy).map(|v| v as f32));
        }
    }
    FaceImage::from_raw_clamped(w, h, data)
}
