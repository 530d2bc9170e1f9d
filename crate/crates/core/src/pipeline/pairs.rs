//! Same-video frame pairs for training and inference.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::manifest_io::{Label, VideoRecord};
use crate::rng::{derive_seed, rng_from};

pub const DEFAULT_MIN_GAP: usize = 5;
pub const DEFAULT_TRAIN_PAIRS: usize = 60;
pub const INFERENCE_PAIRS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairSample {
    pub video_id: String,
    pub frame_i: u32,
    pub frame_j: u32,
    pub gap: u32,
}

/// All `(i, j)` with `i < j < n_frames` and `j - i >= min_gap`, in
/// lexicographic order.
pub fn eligible_pairs(n_frames: usize, min_gap: usize) -> Vec<(u32, u32)> {
    let gap = min_gap.max(1);
    (0..n_frames)
        .flat_map(|i| (i + gap..n_frames).map(move |j| (i as u32, j as u32)))
        .collect()
}

fn to_sample(video_id: &str, (i, j): (u32, u32)) -> PairSample {
    PairSample { video_id: video_id.to_string(), frame_i: i, frame_j: j, gap: j - i }
}

/// Up to `k_pairs` distinct pairs drawn uniformly from the eligible set of a
/// real video, in draw order.
pub fn sample_training_pairs(
    record: &VideoRecord,
    k_pairs: usize,
    min_gap: usize,
    seed: u64,
) -> Result<Vec<PairSample>, PipelineError> {
    if record.label != Label::Real {
        return Err(PipelineError::FakeInTraining { video_id: record.video_id.clone() });
    }
    let eligible = eligible_pairs(record.n_frames(), min_gap);
    if eligible.is_empty() {
        return Err(PipelineError::NoEligiblePair { video_id: record.video_id.clone(), min_gap });
    }
    let mut rng = rng_from(derive_seed(derive_seed(seed, "train-pairs"), &record.video_id));
    let k = k_pairs.min(eligible.len());
    Ok(index::sample(&mut rng, eligible.len(), k).into_iter().map(|i| to_sample(&record.video_id, eligible[i])).collect())
}

/// `n_pairs` pairs for scoring: distinct when the eligible set is large
/// enough, otherwise drawn with replacement.
pub fn sample_inference_pairs(
    record: &VideoRecord,
    n_pairs: usize,
    min_gap: usize,
    seed: u64,
) -> Result<Vec<PairSample>, PipelineError> {
    let eligible = eligible_pairs(record.n_frames(), min_gap);
    if eligible.is_empty() {
        return Err(PipelineError::NoEligiblePair { video_id: record.video_id.clone(), min_gap });
    }
    let mut rng = rng_from(derive_seed(derive_seed(seed, "infer-pairs"), &record.video_id));
    let picks: Vec<usize> = if eligible.len() >= n_pairs {
        index::sample(&mut rng, eligible.len(), n_pairs).into_vec()
    } else {
        (0..n_pairs).map(|_| rng.gen_range(0..eligible.len())).collect()
    };
    Ok(picks.into_iter().map(|i| to_sample(&record.video_id, eligible[i])).collect())
}
