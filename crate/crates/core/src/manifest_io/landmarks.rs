//! 68-point landmark sets and their text file format.
//!
//! One frame per block of 68 `x y` rows; blocks are separated by a blank
//! line. Coordinates are written with Rust's shortest round-trip float
//! formatting, so write -> read is bit-exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geom::Point;

/// Number of points in the iBUG-68 layout.
pub const LANDMARK_COUNT: usize = 68;

#[derive(Debug, Error)]
pub enum LandmarkError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("frame {frame}: expected {LANDMARK_COUNT} points, found {found}")]
    PointCount { frame: usize, found: usize },
    #[error("expected {expected} frames of landmarks, found {found}")]
    FrameCount { expected: usize, found: usize },
    #[error("frame {frame}, point {point}: non-finite coordinate")]
    NonFinite { frame: usize, point: usize },
}

/// The 68 landmark coordinates of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: [Point; LANDMARK_COUNT],
}

impl LandmarkSet {
    /// Fails with the offending point index when a coordinate is not finite.
    pub fn new(points: [Point; LANDMARK_COUNT]) -> Result<Self, usize> {
        match points.iter().position(|p| !p.is_finite()) {
            Some(i) => Err(i),
            None => Ok(Self { points }),
        }
    }

    pub fn from_slice(points: &[Point]) -> Option<Self> {
        let arr: [Point; LANDMARK_COUNT] = points.try_into().ok()?;
        Self::new(arr).ok()
    }

    pub fn points(&self) -> &[Point; LANDMARK_COUNT] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Point {
        self.points[index]
    }

    /// Applies `f` to every point. Non-finite results are rejected.
    pub fn map(&self, f: impl Fn(Point) -> Point) -> Option<Self> {
        let mut out = self.points;
        for p in out.iter_mut() {
            *p = f(*p);
        }
        Self::new(out).ok()
    }
}

/// Parses landmark text. The number of frames is whatever the text holds.
pub fn parse_landmarks(text: &str) -> Result<Vec<LandmarkSet>, LandmarkError> {
    let mut frames = Vec::new();
    let mut current: Vec<Point> = Vec::with_capacity(LANDMARK_COUNT);

    let flush = |current: &mut Vec<Point>, frames: &mut Vec<LandmarkSet>| {
        if current.is_empty() {
            return Ok(());
        }
        let frame = frames.len();
        if current.len() != LANDMARK_COUNT {
            return Err(LandmarkError::PointCount { frame, found: current.len() });
        }
        let mut arr = [Point::default(); LANDMARK_COUNT];
        arr.copy_from_slice(current);
        let set = LandmarkSet::new(arr).map_err(|point| LandmarkError::NonFinite { frame, point })?;
        frames.push(set);
        current.clear();
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            flush(&mut current, &mut frames)?;
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(xs), Some(ys), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(LandmarkError::Parse {
                line: idx + 1,
                message: format!("expected two coordinates, got `{line}`"),
            });
        };
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| LandmarkError::Parse {
                line: idx + 1,
                message: format!("bad coordinate `{s}`: {e}"),
            })
        };
        current.push(Point::new(parse(xs)?, parse(ys)?));
    }
    flush(&mut current, &mut frames)?;
    Ok(frames)
}

/// Reads a landmark file and checks that it holds exactly `n_frames` sets.
pub fn load_landmarks(path: &Path, n_frames: usize) -> Result<Vec<LandmarkSet>, LandmarkError> {
    let text = std::fs::read_to_string(path).map_err(|source| LandmarkError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let frames = parse_landmarks(&text)?;
    if frames.len() != n_frames {
        return Err(LandmarkError::FrameCount { expected: n_frames, found: frames.len() });
    }
    Ok(frames)
}

pub fn format_landmarks(frames: &[LandmarkSet]) -> String {
    let mut out = String::with_capacity(frames.len() * LANDMARK_COUNT * 24);
    for (i, set) in frames.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for p in set.points() {
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
    }
    out
}

pub fn write_landmarks(frames: &[LandmarkSet], path: &Path) -> Result<(), LandmarkError> {
    std::fs::write(path, format_landmarks(frames)).map_err(|source| LandmarkError::Io {
        path: path.to_path_buf(),
        source,
    })
}
