//! Training on real same-video pairs and video-level scoring.

pub mod ablation;
pub mod pairs;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcomb::{combine, CombinationMode, CombinedFeature, LengthMismatch, PairProvenance};
use crate::eval::{EvalError, ScoredSample};
use crate::features::{extract_all, ExtractorSpec, FeatureError};
use crate::gmm::{fit_features, load_model, save_model, AnomalyModel, GmmConfig, GmmError, GmmModel};
use crate::manifest_io::manifest::manifest_dir;
use crate::manifest_io::{load_manifest, EmbeddingStore, Label, ManifestError, Split, VideoRecord};

pub use pairs::{
    eligible_pairs, sample_inference_pairs, sample_training_pairs, PairSample, DEFAULT_MIN_GAP, DEFAULT_TRAIN_PAIRS,
    INFERENCE_PAIRS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] GmmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Combine(#[from] LengthMismatch),
    #[error("video `{video_id}` is labeled fake and cannot be used for training")]
    FakeInTraining { video_id: String },
    #[error("video `{video_id}` has no frame pair with gap >= {min_gap}")]
    NoEligiblePair { video_id: String, min_gap: usize },
    #[error("no embedding for video `{video_id}` frame {frame}")]
    MissingEmbedding { video_id: String, frame: u32 },
    #[error("manifest has no real training videos")]
    NoTrainingVideos,
    #[error("embedding dim {store} does not match model dim {model}")]
    DimMismatch { store: usize, model: usize },
    #[error("score table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("video `{video_id}` has no label")]
    Unlabeled { video_id: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub combine: CombinationMode,
    pub gmm: GmmConfig,
    pub k_pairs: usize,
    pub min_gap: usize,
    /// Seeds pair sampling. The mixture uses `gmm.seed`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            combine: CombinationMode::default(),
            gmm: GmmConfig::default(),
            k_pairs: DEFAULT_TRAIN_PAIRS,
            min_gap: DEFAULT_MIN_GAP,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Default settings with one seed for both pair sampling and EM.
    pub fn seeded(seed: u64) -> Self {
        Self { seed, gmm: GmmConfig { seed, ..GmmConfig::default() }, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_videos: usize,
    pub n_pairs: usize,
    pub dim: usize,
    pub n_components: usize,
    pub combine: CombinationMode,
    pub seed: u64,
    pub gmm_seed: u64,
    pub min_gap: usize,
    pub k_pairs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferConfig {
    pub combine: CombinationMode,
    pub n_pairs: usize,
    pub min_gap: usize,
    pub seed: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self { combine: CombinationMode::default(), n_pairs: INFERENCE_PAIRS, min_gap: DEFAULT_MIN_GAP, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video_id: String,
    pub label: Option<Label>,
    pub score: f64,
    pub n_pairs: usize,
}

/// Real videos of the training split.
pub fn training_records(records: &[VideoRecord]) -> Vec<VideoRecord> {
    records.iter().filter(|r| r.split == Split::Train && r.label == Label::Real).cloned().collect()
}

pub fn test_records(records: &[VideoRecord]) -> Vec<VideoRecord> {
    records.iter().filter(|r| r.split == Split::Test).cloned().collect()
}

fn embedding<'a>(store: &'a EmbeddingStore, video_id: &str, frame: u32) -> Result<&'a crate::manifest_io::Embedding, PipelineError> {
    store
        .get(video_id, frame)
        .ok_or_else(|| PipelineError::MissingEmbedding { video_id: video_id.to_string(), frame })
}

pub fn combine_pair(store: &EmbeddingStore, pair: &PairSample, mode: CombinationMode) -> Result<CombinedFeature, PipelineError> {
    let a = embedding(store, &pair.video_id, pair.frame_i)?;
    let b = embedding(store, &pair.video_id, pair.frame_j)?;
    let mut f = combine(a, b, mode)?;
    f.pair = Some(PairProvenance { video_id: pair.video_id.clone(), frame_i: pair.frame_i, frame_j: pair.frame_j });
    Ok(f)
}

/// Combined features of sampled pairs from every record, in record order.
pub fn training_features(
    records: &[VideoRecord],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
) -> Result<Vec<CombinedFeature>, PipelineError> {
    let mut out = Vec::new();
    for r in records {
        for p in sample_training_pairs(r, cfg.k_pairs, cfg.min_gap, cfg.seed)? {
            out.push(combine_pair(store, &p, cfg.combine)?);
        }
    }
    Ok(out)
}

/// Fails unless every feature is tagged with a pair from a real video among
/// `records`.
pub fn ensure_real_only(features: &[CombinedFeature], records: &[VideoRecord]) -> Result<(), PipelineError> {
    let labels: HashMap<&str, Label> = records.iter().map(|r| (r.video_id.as_str(), r.label)).collect();
    for f in features {
        let video_id = f.pair.as_ref().map(|p| p.video_id.as_str()).unwrap_or("<untagged>");
        if labels.get(video_id) != Some(&Label::Real) {
            return Err(PipelineError::FakeInTraining { video_id: video_id.to_string() });
        }
    }
    Ok(())
}

/// Samples training pairs from `records` (all must be real) and fits the
/// mixture.
pub fn train_model(
    records: &[VideoRecord],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
) -> Result<(GmmModel, TrainReport), PipelineError> {
    if records.is_empty() {
        return Err(PipelineError::NoTrainingVideos);
    }
    let features = training_features(records, store, cfg)?;
    ensure_real_only(&features, records)?;
    log::info!("fitting {} components on {} pairs from {} videos", cfg.gmm.n_components, features.len(), records.len());
    let model = fit_features(&features, &cfg.gmm)?;
    let meta = model.fit_metadata().cloned().expect("fitted model carries metadata");
    let report = TrainReport {
        n_videos: records.len(),
        n_pairs: features.len(),
        dim: model.dim(),
        n_components: model.n_components(),
        combine: cfg.combine,
        seed: cfg.seed,
        gmm_seed: cfg.gmm.seed,
        min_gap: cfg.min_gap,
        k_pairs: cfg.k_pairs,
        iterations: meta.iterations,
        converged: meta.converged,
        final_log_likelihood: meta.final_log_likelihood,
    };
    Ok((model, report))
}

/// Loads the manifest, embeds its real training videos, fits and saves the
/// model to `model_out`.
pub fn run_train(
    manifest: &Path,
    spec: &ExtractorSpec,
    cfg: &TrainConfig,
    model_out: &Path,
) -> Result<TrainReport, PipelineError> {
    let all = load_manifest(manifest)?;
    let records = training_records(&all);
    if records.is_empty() {
        return Err(PipelineError::NoTrainingVideos);
    }
    let store = extract_all(&records, &manifest_dir(manifest), spec)?;
    let (model, report) = train_model(&records, &store, cfg)?;
    save_model(&model, model_out)?;
    Ok(report)
}

/// Mean of values, offset by the first so identical values average exactly.
fn exact_mean(values: &[f64]) -> f64 {
    let first = values[0];
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

pub fn score_pairs(
    pairs: &[PairSample],
    store: &EmbeddingStore,
    model: &dyn AnomalyModel,
    mode: CombinationMode,
) -> Result<Vec<f64>, PipelineError> {
    pairs
        .iter()
        .map(|p| {
            let f = combine_pair(store, p, mode)?;
            Ok(model.score(&f.values)?)
        })
        .collect()
}

/// Mean anomaly score over the sampled inference pairs of one video.
pub fn score_video(
    record: &VideoRecord,
    store: &EmbeddingStore,
    model: &dyn AnomalyModel,
    cfg: &InferConfig,
) -> Result<VideoScore, PipelineError> {
    if store.dim() != model.dim() {
        return Err(PipelineError::DimMismatch { store: store.dim(), model: model.dim() });
    }
    let pairs = sample_inference_pairs(record, cfg.n_pairs, cfg.min_gap, cfg.seed)?;
    let scores = score_pairs(&pairs, store, model, cfg.combine)?;
    Ok(VideoScore {
        video_id: record.video_id.clone(),
        label: Some(record.label),
        score: exact_mean(&scores),
        n_pairs: scores.len(),
    })
}

/// Scores videos in parallel; output follows `records` order.
pub fn score_videos(
    records: &[VideoRecord],
    store: &EmbeddingStore,
    model: &dyn AnomalyModel,
    cfg: &InferConfig,
) -> Result<Vec<VideoScore>, PipelineError> {
    records.par_iter().map(|r| score_video(r, store, model, cfg)).collect()
}

/// Scores the test split of a manifest and writes the score table.
pub fn run_infer(
    manifest: &Path,
    spec: &ExtractorSpec,
    model_path: &Path,
    cfg: &InferConfig,
    table_out: &Path,
) -> Result<Vec<VideoScore>, PipelineError> {
    let records = test_records(&load_manifest(manifest)?);
    let model = load_model(model_path)?;
    let scores = if records.is_empty() {
        Vec::new()
    } else {
        let store = extract_all(&records, &manifest_dir(manifest), spec)?;
        score_videos(&records, &store, &model, cfg)?
    };
    write_score_table(&scores, table_out)?;
    Ok(scores)
}

pub const SCORE_TABLE_HEADER: &str = "video_id\tlabel\tscore\tn_pairs";

/// Tab-separated table; scores use the shortest round-trip decimal form.
pub fn format_score_table(scores: &[VideoScore]) -> String {
    let mut out = format!("{SCORE_TABLE_HEADER}\n");
    for s in scores {
        let label = s.label.map_or("unknown".to_string(), |l| l.to_string());
        out.push_str(&format!("{}\t{}\t{}\t{}\n", s.video_id, label, s.score, s.n_pairs));
    }
    out
}

pub fn parse_score_table(text: &str) -> Result<Vec<VideoScore>, PipelineError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == SCORE_TABLE_HEADER => {}
        _ => return Err(PipelineError::Table { line: 1, message: format!("expected header `{SCORE_TABLE_HEADER}`") }),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| PipelineError::Table { line: line_no, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        }
        let label = match cols[1] {
            "unknown" => None,
            l => Some(l.parse::<Label>().map_err(|e| bad(e.to_string()))?),
        };
        let score: f64 = cols[2].parse().map_err(|e| bad(format!("score: {e}")))?;
        let n_pairs: usize = cols[3].parse().map_err(|e| bad(format!("n_pairs: {e}")))?;
        out.push(VideoScore { video_id: cols[0].to_string(), label, score, n_pairs });
    }
    Ok(out)
}

pub fn write_score_table(scores: &[VideoScore], path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, format_score_table(scores)).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

pub fn read_score_table(path: &Path) -> Result<Vec<VideoScore>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    parse_score_table(&text)
}

/// Video scores as AUC inputs, fake = positive.
pub fn to_scored_samples(scores: &[VideoScore]) -> Result<Vec<ScoredSample>, PipelineError> {
    scores
        .iter()
        .map(|s| {
            let label = s.label.ok_or_else(|| PipelineError::Unlabeled { video_id: s.video_id.clone() })?;
            Ok(ScoredSample::new(s.video_id.clone(), s.score, label.as_binary()))
        })
        .collect()
}

#[cfg(test)]
mod tests;
