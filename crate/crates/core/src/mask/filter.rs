//! Gaussian smoothing and elastic deformation of masks.

use rand::Rng;

use super::{BlendMask, MaskError};
use crate::rng::rng_from;

/// Normalized 1-D Gaussian taps truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable convolution of a row-major grid with replicate borders.
///
/// Each output is accumulated as `v + sum(w_i * (v_i - v))`, which equals
/// `sum(w_i * v_i)` for normalized taps and leaves constant regions exact.
pub fn convolve_separable(values: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0; values.len()];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            let c = row[x];
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let xi = clamp(x as isize + t as isize - radius, width);
                acc += w * (row[xi] - c);
            }
            tmp[y * width + x] = c + acc;
        }
    }
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        for x in 0..width {
            let c = tmp[y * width + x];
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let yi = clamp(y as isize + t as isize - radius, height);
                acc += w * (tmp[yi * width + x] - c);
            }
            out[y * width + x] = c + acc;
        }
    }
    out
}

/// Gaussian blur of a mask, output clamped to [0, 1].
pub fn gaussian_smooth(mask: &BlendMask, kernel_sigma: f64) -> Result<BlendMask, MaskError> {
    if !(kernel_sigma > 0.0 && kernel_sigma.is_finite()) {
        return Err(MaskError::InvalidParameter(format!("kernel sigma must be positive, got {kernel_sigma}")));
    }
    let kernel = gaussian_kernel(kernel_sigma);
    let mut out = convolve_separable(mask.values(), mask.width(), mask.height(), &kernel);
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(BlendMask::from_values(mask.width(), mask.height(), out))
}

/// Bilinear sample of a row-major grid at `(x, y)`, clamping to the border.
pub fn sample_bilinear(values: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let at = |xx: usize, yy: usize| values[yy * width + xx];
    let top = at(x0, y0) + (at(x1, y0) - at(x0, y0)) * fx;
    let bottom = at(x0, y1) + (at(x1, y1) - at(x0, y1)) * fx;
    top + (bottom - top) * fy
}

/// Random elastic warp: per-pixel displacements drawn uniformly from
/// `[-alpha, alpha]`, smoothed by a Gaussian of scale `sigma`, then applied
/// by bilinear resampling with border replication.
pub fn elastic_deform(mask: &BlendMask, alpha: f64, sigma: f64, seed: u64) -> Result<BlendMask, MaskError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(MaskError::InvalidParameter(format!("alpha must be non-negative, got {alpha}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MaskError::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let (w, h) = (mask.width(), mask.height());
    if w == 0 || h == 0 {
        return Ok(mask.clone());
    }
    let mut rng = rng_from(seed);
    let n = w * h;
    let dx: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0) * alpha).collect();
    let dy: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0) * alpha).collect();
    let kernel = gaussian_kernel(sigma);
    let dx = convolve_separable(&dx, w, h, &kernel);
    let dy = convolve_separable(&dy, w, h, &kernel);

    let src = mask.values();
    let mut out = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = sample_bilinear(src, w, h, x as f64 + dx[i], y as f64 + dy[i]);
            out[i] = v.clamp(0.0, 1.0);
        }
    }
    Ok(BlendMask::from_values(w, h, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn disc(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BlendMask {
        let mut m = BlendMask::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                    m.set(x, y, 1.0);
                }
            }
        }
        m
    }

    #[test]
    fn kernel_is_normalized_and_truncated_at_three_sigma() {
        let k = gaussian_kernel(5.0);
        assert_eq!(k.len(), 31);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(0.4).len(), 5);
    }

    #[test]
    fn zero_and_constant_masks_are_fixed_points() {
        let z = BlendMask::zeros(40, 30);
        assert_eq!(gaussian_smooth(&z, 5.0).unwrap(), z);
        let one = BlendMask::from_values(40, 30, vec![1.0; 1200]);
        assert_eq!(gaussian_smooth(&one, 5.0).unwrap(), one);
        let half = BlendMask::from_values(40, 30, vec![0.5; 1200]);
        assert_eq!(gaussian_smooth(&half, 3.3).unwrap(), half);
    }

    #[test]
    fn impulse_matches_directly_evaluated_kernel() {
        let sigma = 2.5;
        let (w, h) = (41, 41);
        let mut m = BlendMask::zeros(w, h);
        m.set(20, 20, 1.0);
        let out = gaussian_smooth(&m, sigma).unwrap();
        let r = (3.0 * sigma).ceil() as i64;
        let g = |dx: i64, dy: i64| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
        let mut z = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                z += g(dx, dy);
            }
        }
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let (dx, dy) = (x - 20, y - 20);
                let expect = if dx.abs() <= r && dy.abs() <= r { g(dx, dy) / z } else { 0.0 };
                let got = out.get(x as usize, y as usize);
                assert!((got - expect).abs() < 1e-6, "({x},{y}) {got} vs {expect}");
            }
        }
    }

    #[test]
    fn interior_mass_is_preserved() {
        let m = disc(120, 120, 60.0, 60.0, 25.0);
        let out = gaussian_smooth(&m, 5.0).unwrap();
        let (a, b) = (m.values().iter().sum::<f64>(), out.values().iter().sum::<f64>());
        assert!((a - b).abs() / a < 0.01, "{a} vs {b}");
        assert!(out.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let m = BlendMask::zeros(4, 4);
        assert!(gaussian_smooth(&m, 0.0).is_err());
        assert!(gaussian_smooth(&m, f64::NAN).is_err());
        assert!(elastic_deform(&m, -1.0, 2.0, 0).is_err());
        assert!(elastic_deform(&m, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn zero_alpha_is_identity() {
        let m = disc(64, 48, 30.0, 20.0, 12.0);
        let smooth = gaussian_smooth(&m, 2.0).unwrap();
        assert_eq!(elastic_deform(&m, 0.0, 7.0, 3).unwrap(), m);
        assert_eq!(elastic_deform(&smooth, 0.0, 7.0, 3).unwrap(), smooth);
    }

    #[test]
    fn deformation_is_seeded_and_bounded() {
        let m = disc(96, 96, 48.0, 48.0, 30.0);
        let a = elastic_deform(&m, 50.0, 7.0, 99).unwrap();
        let b = elastic_deform(&m, 50.0, 7.0, 99).unwrap();
        let c = elastic_deform(&m, 50.0, 7.0, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, m);
        let mut rng = crate::rng::rng_from(1);
        for seed in 0..10 {
            let vals: Vec<f64> = (0..32 * 32).map(|_| rng.gen::<f64>()).collect();
            let r = elastic_deform(&BlendMask::from_values(32, 32, vals), 200.0, 2.0, seed).unwrap();
            assert!(r.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn bilinear_sampling_interpolates_and_clamps() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(sample_bilinear(&v, 2, 2, 0.5, 0.5), 1.5);
        assert_eq!(sample_bilinear(&v, 2, 2, -4.0, 9.0), 2.0);
        assert_eq!(sample_bilinear(&v, 2, 2, 1.0, 1.0), 3.0);
    }
}
