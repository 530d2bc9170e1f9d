//! Face crop and resize to the fixed network input size.

use super::warp::crop_resize;
use super::{FaceImage, SynthError, FACE_SIZE};
use crate::geom::{BBox, Point};
use crate::manifest_io::LandmarkSet;

pub const DEFAULT_ENLARGE: f64 = 1.3;

/// Integer square crop in raw-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropBox {
    pub x: usize,
    pub y: usize,
    pub side: usize,
}

/// Square box of side `round(max(w, h) * factor)` centered on `bbox`, shifted
/// to lie inside the image and shrunk only if the image is smaller.
pub fn crop_box(bbox: &BBox, factor: f64, img_w: usize, img_h: usize) -> Result<CropBox, SynthError> {
    let finite = [bbox.x, bbox.y, bbox.width, bbox.height, factor].iter().all(|v| v.is_finite());
    if !finite || bbox.width <= 0.0 || bbox.height <= 0.0 || factor <= 0.0 {
        return Err(SynthError::Degenerate(format!("bounding box {bbox:?} with factor {factor}")));
    }
    if img_w == 0 || img_h == 0 {
        return Err(SynthError::Dimensions("empty raw image".into()));
    }
    let c = bbox.center();
    if c.x < 0.0 || c.y < 0.0 || c.x > img_w as f64 || c.y > img_h as f64 {
        return Err(SynthError::Degenerate(format!("bounding box {bbox:?} lies outside the image")));
    }
    let side = ((bbox.width.max(bbox.height) * factor).round() as usize).clamp(1, img_w.min(img_h));
    let place = |center: f64, limit: usize| {
        let start = (center - side as f64 / 2.0).round();
        start.clamp(0.0, (limit - side) as f64) as usize
    };
    Ok(CropBox { x: place(c.x, img_w), y: place(c.y, img_h), side })
}

/// Crops the enlarged box, resizes it to 224x224 and maps landmarks into the
/// crop frame, clamped to [0, 224). Pixels stay in [0, 255].
pub fn preprocess(
    raw: &FaceImage,
    bbox: &BBox,
    landmarks: &LandmarkSet,
    factor: f64,
) -> Result<(FaceImage, LandmarkSet), SynthError> {
    let cb = crop_box(bbox, factor, raw.width(), raw.height())?;
    let side = cb.side as f64;
    let face = crop_resize(raw, cb.x as f64, cb.y as f64, side, side, FACE_SIZE, FACE_SIZE);
    let scale = FACE_SIZE as f64 / side;
    let upper = f64::from_bits((FACE_SIZE as f64).to_bits() - 1);
    let lm = landmarks
        .map(|p| {
            Point::new(
                ((p.x - cb.x as f64) * scale).clamp(0.0, upper),
                ((p.y - cb.y as f64) * scale).clamp(0.0, upper),
            )
        })
        .expect("finite landmarks stay finite");
    Ok((face, lm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest_io::LANDMARK_COUNT;
    use proptest::prelude::*;

    fn grid_landmarks(x0: f64, y0: f64, span: f64) -> LandmarkSet {
        let pts: Vec<Point> = (0..LANDMARK_COUNT)
            .map(|i| Point::new(x0 + span * (i % 9) as f64 / 8.0, y0 + span * (i / 9) as f64 / 7.0))
            .collect();
        LandmarkSet::from_slice(&pts).unwrap()
    }

    #[test]
    fn exact_box_with_unit_factor_is_identity() {
        let raw = FaceImage::from_fn(300, 260, |x, y| [(x % 256) as f32, (y % 256) as f32, 7.0]);
        let lm = grid_landmarks(40.0, 30.0, 150.0);
        let bbox = BBox::new(20.0, 10.0, 224.0, 224.0);
        let (face, out_lm) = preprocess(&raw, &bbox, &lm, 1.0).unwrap();
        let expected = FaceImage::from_fn(224, 224, |x, y| raw.pixel(x + 20, y + 10));
        assert_eq!(face, expected);
        for (a, b) in lm.points().iter().zip(out_lm.points()) {
            assert_eq!(b.x, a.x - 20.0);
            assert_eq!(b.y, a.y - 10.0);
        }
    }

    #[test]
    fn enlargement_multiplies_side() {
        let cb = crop_box(&BBox::new(400.0, 300.0, 200.0, 200.0), DEFAULT_ENLARGE, 1000, 1000).unwrap();
        assert_eq!(cb.side, 260);
        assert_eq!((cb.x, cb.y), (370, 270));
        let cb = crop_box(&BBox::new(400.0, 300.0, 120.0, 200.0), 1.3, 1000, 1000).unwrap();
        assert_eq!(cb.side, 260);
    }

    #[test]
    fn boxes_near_the_border_are_shifted_inside() {
        let cb = crop_box(&BBox::new(0.0, 0.0, 100.0, 100.0), 1.3, 640, 480).unwrap();
        assert_eq!((cb.x, cb.y, cb.side), (0, 0, 130));
        let cb = crop_box(&BBox::new(400.0, 200.0, 400.0, 400.0), 1.3, 640, 480).unwrap();
        assert_eq!(cb.side, 480);
        assert!(cb.x + cb.side <= 640 && cb.y + cb.side <= 480);
    }

    #[test]
    fn degenerate_boxes_are_rejected() {
        assert!(crop_box(&BBox::new(10.0, 10.0, 0.0, 30.0), 1.3, 100, 100).is_err());
        assert!(crop_box(&BBox::new(10.0, 10.0, 30.0, -1.0), 1.3, 100, 100).is_err());
        assert!(crop_box(&BBox::new(f64::NAN, 10.0, 30.0, 30.0), 1.3, 100, 100).is_err());
        assert!(crop_box(&BBox::new(500.0, 10.0, 30.0, 30.0), 1.3, 100, 100).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn remapped_landmarks_stay_in_frame(
            x in 0.0f64..500.0, y in 0.0f64..350.0, w in 5.0f64..300.0, h in 5.0f64..300.0,
            lx in -50.0f64..600.0, ly in -50.0f64..450.0, span in 0.0f64..400.0,
        ) {
            let raw = FaceImage::filled(640, 480, [10.0, 20.0, 30.0]);
            let bbox = BBox::new(x, y, w, h);
            prop_assume!(bbox.center().x <= 640.0 && bbox.center().y <= 480.0);
            let (face, lm) = preprocess(&raw, &bbox, &grid_landmarks(lx, ly, span), 1.3).unwrap();
            prop_assert_eq!((face.width(), face.height()), (224, 224));
            for p in lm.points() {
                prop_assert!((0.0..224.0).contains(&p.x) && (0.0..224.0).contains(&p.y));
            }
        }
    }
}
