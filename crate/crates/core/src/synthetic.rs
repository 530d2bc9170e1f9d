//! Procedurally drawn talking-head videos with exact landmarks, for
//! end-to-end runs without a real dataset.
//!
//! Landmarks are laid out in a face-centered frame where the face half-width
//! is 1 and y points down, then posed into the 224x224 crop per frame.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geom::Point;
use crate::manifest_io::{write_landmarks, write_manifest, Label, LandmarkError, LandmarkSet, ManifestError, Split, VideoRecord};
use crate::rng::{derive_seed, derive_seed_n, rng_from};
use crate::synth::{make_pseudo_deepfake, FaceImage, SchemeChoice, SynthError, TransformConfig, FACE_SIZE};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Landmarks(#[from] LandmarkError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

/// Fixed appearance of one synthetic person.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub skin: [f64; 3],
    pub hair: [f64; 3],
    pub lips: [f64; 3],
    pub iris: [f64; 3],
    pub background: [[f64; 3]; 2],
    pub eye_spacing: f64,
    pub eye_height: f64,
    pub mouth_width: f64,
    pub jaw_width: f64,
    pub texture_seed: u64,
}

impl Subject {
    pub fn random(seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut color = |lo: f64, hi: f64| [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)];
        let tone = color(0.0, 1.0);
        let skin = [150.0 + 80.0 * tone[0], 110.0 + 70.0 * tone[0], 90.0 + 60.0 * tone[0] * tone[1]];
        let hair = color(10.0, 90.0);
        let lips = [140.0 + 60.0 * tone[2], 60.0 + 30.0 * tone[1], 70.0 + 30.0 * tone[1]];
        let iris = color(20.0, 140.0);
        let background = [color(20.0, 235.0), color(20.0, 235.0)];
        Self {
            skin,
            hair,
            lips,
            iris,
            background,
            eye_spacing: rng.gen_range(0.38..0.5),
            eye_height: rng.gen_range(-0.34..-0.24),
            mouth_width: rng.gen_range(0.32..0.45),
            jaw_width: rng.gen_range(0.9..1.05),
            texture_seed: rng.gen(),
        }
    }
}

/// Per-frame head pose and expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub dx: f64,
    pub dy: f64,
    /// Pixels per face unit.
    pub scale: f64,
    pub roll: f64,
    pub mouth_open: f64,
    pub brow_raise: f64,
}

/// Smooth pose drift over a video; `phase_seed` picks the trajectory.
pub fn pose_at(frame: usize, n_frames: usize, phase_seed: u64) -> Pose {
    let mut rng = rng_from(phase_seed);
    let mut ph = || rng.gen_range(0.0..TAU);
    let t = frame as f64 / n_frames.max(1) as f64 * TAU;
    Pose {
        dx: 5.0 * (t + ph()).sin(),
        dy: 4.0 * (1.3 * t + ph()).sin(),
        scale: 68.0 + 3.0 * (0.7 * t + ph()).sin(),
        roll: 0.05 * (1.1 * t + ph()).sin(),
        mouth_open: 0.05 + 0.05 * (2.3 * t + ph()).sin(),
        brow_raise: 0.03 * (1.7 * t + ph()).sin(),
    }
}

/// The 68 landmarks in face units.
pub fn canonical_landmarks(s: &Subject, pose: &Pose) -> [Point; 68] {
    let mut p = [Point::default(); 68];
    for (i, q) in p.iter_mut().enumerate().take(17) {
        let th = PI * i as f64 / 16.0;
        *q = Point::new(-s.jaw_width * th.cos(), -0.1 + 1.15 * th.sin());
    }
    for i in 0..5 {
        let u = i as f64 / 4.0;
        let arch = 0.08 * (PI * u).sin();
        let y = s.eye_height - 0.22 - arch - pose.brow_raise;
        p[17 + i] = Point::new(-s.eye_spacing - 0.28 + 0.5 * u, y);
        p[26 - i] = Point::new(s.eye_spacing + 0.28 - 0.5 * u, y);
    }
    for i in 0..4 {
        p[27 + i] = Point::new(0.0, s.eye_height + 0.02 + 0.14 * i as f64);
    }
    for i in 0..5 {
        let u = i as f64 / 4.0 - 0.5;
        p[31 + i] = Point::new(0.36 * u, 0.28 - 0.04 * (1.0 - 4.0 * u * u));
    }
    for (base, cx) in [(36, -s.eye_spacing), (42, s.eye_spacing)] {
        for k in 0..6 {
            let th = PI + TAU * k as f64 / 6.0;
            p[base + k] = Point::new(cx + 0.17 * th.cos(), s.eye_height + 0.07 * th.sin());
        }
    }
    let mouth_y = 0.62;
    for k in 0..12 {
        let th = PI + TAU * k as f64 / 12.0;
        let ry = if th.sin() > 0.0 { 0.1 + pose.mouth_open } else { 0.09 };
        p[48 + k] = Point::new(s.mouth_width * th.cos(), mouth_y + ry * th.sin());
    }
    for k in 0..8 {
        let th = PI + TAU * k as f64 / 8.0;
        let ry = if th.sin() > 0.0 { 0.02 + pose.mouth_open } else { 0.02 };
        p[60 + k] = Point::new(0.7 * s.mouth_width * th.cos(), mouth_y + ry * th.sin());
    }
    p
}

fn face_center() -> Point {
    Point::new(FACE_SIZE as f64 / 2.0, FACE_SIZE as f64 / 2.0 + 4.0)
}

fn to_image(q: Point, pose: &Pose) -> Point {
    let (s, c) = pose.roll.sin_cos();
    let o = face_center();
    Point::new(
        o.x + pose.dx + pose.scale * (c * q.x - s * q.y),
        o.y + pose.dy + pose.scale * (s * q.x + c * q.y),
    )
}

fn to_face(p: Point, pose: &Pose) -> Point {
    let (s, c) = pose.roll.sin_cos();
    let o = face_center();
    let (x, y) = ((p.x - o.x - pose.dx) / pose.scale, (p.y - o.y - pose.dy) / pose.scale);
    Point::new(c * x + s * y, -s * x + c * y)
}

fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let h = derive_seed_n(derive_seed_n(seed, i as u64), j as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Bilinear value noise in [0, 1] with unit lattice spacing.
fn value_noise(seed: u64, u: f64, v: f64) -> f64 {
    let (i, j) = (u.floor() as i64, v.floor() as i64);
    let (fu, fv) = (u - u.floor(), v - v.floor());
    let (su, sv) = (fu * fu * (3.0 - 2.0 * fu), fv * fv * (3.0 - 2.0 * fv));
    let a = lattice(seed, i, j) + (lattice(seed, i + 1, j) - lattice(seed, i, j)) * su;
    let b = lattice(seed, i, j + 1) + (lattice(seed, i + 1, j + 1) - lattice(seed, i, j + 1)) * su;
    a + (b - a) * sv
}

fn inside_ellipse(q: Point, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    ((q.x - cx) / rx).powi(2) + ((q.y - cy) / ry).powi(2)
}

/// Renders one frame. `noise_seed` drives per-frame sensor noise.
pub fn render_frame(s: &Subject, pose: &Pose, noise_seed: u64) -> (FaceImage, LandmarkSet) {
    let canon = canonical_landmarks(s, pose);
    let lm = LandmarkSet::new(canon.map(|q| to_image(q, pose))).expect("finite landmarks");
    let mut rng = rng_from(noise_seed);
    let img = FaceImage::from_fn(FACE_SIZE, FACE_SIZE, |x, y| {
        let p = Point::new(x as f64, y as f64);
        let q = to_face(p, pose);
        let mut col;
        // Background: two-color gradient plus coarse texture fixed to the scene.
        let g = y as f64 / FACE_SIZE as f64;
        let n = value_noise(s.texture_seed ^ 0xb6, x as f64 / 24.0, y as f64 / 24.0) - 0.5;
        col = [0, 1, 2].map(|c| s.background[0][c] * (1.0 - g) + s.background[1][c] * g + 30.0 * n);
        let head = inside_ellipse(q, 0.0, 0.1, s.jaw_width * 1.03, 1.22);
        if q.y < -0.55 && inside_ellipse(q, 0.0, -0.2, s.jaw_width * 1.12, 1.0) < 1.0 {
            col = s.hair.map(|h| h + 20.0 * (value_noise(s.texture_seed ^ 7, q.x * 12.0, q.y * 12.0) - 0.5));
        }
        if head < 1.0 && q.y >= -0.62 {
            let shade = 1.0 - 0.25 * head - 0.08 * q.x;
            let t = value_noise(s.texture_seed, q.x * 9.0, q.y * 9.0) - 0.5;
            col = s.skin.map(|v| v * shade + 18.0 * t);
            // Eyes.
            for cx in [-s.eye_spacing, s.eye_spacing] {
                let e = inside_ellipse(q, cx, s.eye_height, 0.17, 0.07);
                if e < 1.0 {
                    col = [235.0, 232.0, 228.0];
                    if inside_ellipse(q, cx, s.eye_height, 0.065, 0.065) < 1.0 {
                        col = s.iris;
                    }
                    if inside_ellipse(q, cx, s.eye_height, 0.03, 0.03) < 1.0 {
                        col = [15.0, 12.0, 12.0];
                    }
                }
            }
            // Brows.
            for side in [-1.0, 1.0] {
                let bx = side * (q.x.abs()) - side * s.eye_spacing;
                let by = s.eye_height - 0.22 - 0.08 * (PI * (0.5 + bx / 0.5)).sin().max(0.0) - pose.brow_raise;
                if q.x * side > 0.0 && bx.abs() < 0.26 && (q.y - by).abs() < 0.035 {
                    col = s.hair;
                }
            }
            // Nose shadow.
            if q.x.abs() < 0.18 && q.y > s.eye_height + 0.05 && q.y < 0.3 {
                let k = 0.12 * (1.0 - q.x.abs() / 0.18) * ((q.y - s.eye_height) / 0.6);
                col = col.map(|v| v * (1.0 - k.max(0.0)));
            }
            // Mouth.
            let outer = inside_ellipse(q, 0.0, 0.62, s.mouth_width, 0.09 + 0.5 * pose.mouth_open);
            if outer < 1.0 {
                col = s.lips;
                if inside_ellipse(q, 0.0, 0.62, 0.7 * s.mouth_width, 0.02 + pose.mouth_open) < 1.0 {
                    col = [40.0, 15.0, 20.0];
                }
            }
        }
        let noise: f64 = rng.gen_range(-2.0..2.0);
        col.map(|v| (v + noise) as f32)
    });
    (img, lm)
}

/// Renders `n_frames` frames of one subject.
pub fn render_video(subject: &Subject, n_frames: usize, seed: u64) -> Vec<(FaceImage, LandmarkSet)> {
    (0..n_frames)
        .into_par_iter()
        .map(|f| render_frame(subject, &pose_at(f, n_frames, derive_seed(seed, "pose")), derive_seed_n(seed, f as u64)))
        .collect()
}

/// Replaces every frame with an independently seeded pseudo-fake.
pub fn fake_video(
    frames: &[(FaceImage, LandmarkSet)],
    scheme: SchemeChoice,
    cfg: &TransformConfig,
    seed: u64,
) -> Result<Vec<(FaceImage, LandmarkSet)>, SynthError> {
    frames
        .par_iter()
        .enumerate()
        .map(|(f, (img, lm))| {
            let s = derive_seed_n(seed, f as u64);
            let pf = make_pseudo_deepfake(img, lm, scheme.pick(derive_seed(s, "scheme")), cfg, s)?;
            Ok((pf.image, lm.clone()))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub n_train_real: usize,
    pub n_test_real: usize,
    pub n_test_fake: usize,
    pub n_frames: usize,
    pub seed: u64,
    pub fake_scheme: SchemeChoice,
    pub transforms: TransformConfig,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_train_real: 10,
            n_test_real: 10,
            n_test_fake: 10,
            n_frames: 40,
            seed: 0,
            fake_scheme: SchemeChoice::Random,
            transforms: TransformConfig::default(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

fn write_video(
    dir: &Path,
    video_id: &str,
    subject_id: &str,
    label: Label,
    split: Split,
    frames: &[(FaceImage, LandmarkSet)],
) -> Result<VideoRecord, CorpusError> {
    let frame_dir = dir.join("frames").join(video_id);
    std::fs::create_dir_all(&frame_dir).map_err(io_err(&frame_dir))?;
    let frame_paths: Vec<PathBuf> = (0..frames.len()).map(|f| PathBuf::from(format!("frames/{video_id}/{f:03}.png"))).collect();
    frames
        .par_iter()
        .zip(&frame_paths)
        .try_for_each(|((img, _), rel)| img.save_png(&dir.join(rel)))?;
    let lm_rel = PathBuf::from(format!("landmarks/{video_id}.txt"));
    let lms: Vec<LandmarkSet> = frames.iter().map(|(_, l)| l.clone()).collect();
    write_landmarks(&lms, &dir.join(&lm_rel))?;
    Ok(VideoRecord { video_id: video_id.into(), subject_id: subject_id.into(), label, frame_paths, landmark_path: lm_rel, split })
}

/// Writes frames, landmark files and `manifest.jsonl` under `dir`. Each video
/// shows its own subject; fake test videos are pseudo-fakes of a fresh
/// subject. Returns the manifest path.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<PathBuf, CorpusError> {
    let lm_dir = dir.join("landmarks");
    std::fs::create_dir_all(&lm_dir).map_err(io_err(&lm_dir))?;
    let mut records = Vec::new();
    let groups = [
        ("train-real", spec.n_train_real, Label::Real, Split::Train),
        ("test-real", spec.n_test_real, Label::Real, Split::Test),
        ("test-fake", spec.n_test_fake, Label::Fake, Split::Test),
    ];
    for (prefix, count, label, split) in groups {
        for k in 0..count {
            let video_id = format!("{prefix}-{k:03}");
            let subject_id = format!("subject-{prefix}-{k:03}");
            let vseed = derive_seed(spec.seed, &video_id);
            let subject = Subject::random(derive_seed(vseed, "subject"));
            let mut frames = render_video(&subject, spec.n_frames, derive_seed(vseed, "render"));
            if label == Label::Fake {
                frames = fake_video(&frames, spec.fake_scheme, &spec.transforms, derive_seed(vseed, "fake"))?;
            }
            records.push(write_video(dir, &video_id, &subject_id, label, split, &frames)?);
        }
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&records, &manifest)?;
    Ok(manifest)
}
