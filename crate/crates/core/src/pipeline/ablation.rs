//! Combination-mode sweep: one model per mode, AUC per dataset.

use super::{score_videos, to_scored_samples, train_model, InferConfig, PipelineError, TrainConfig};
use crate::diffcomb::CombinationMode;
use crate::eval::{evaluate, ConfigEcho, EvalReport};
use crate::manifest_io::{EmbeddingStore, VideoRecord};

/// A labeled test set with its embeddings.
#[derive(Debug, Clone)]
pub struct AblationDataset {
    pub name: String,
    pub records: Vec<VideoRecord>,
    pub store: EmbeddingStore,
}

/// Trains one model per mode on `train` and evaluates it on every dataset.
/// Reports come out mode-major, in the given orders.
pub fn run_ablation(
    train_records: &[VideoRecord],
    train_store: &EmbeddingStore,
    datasets: &[AblationDataset],
    modes: &[CombinationMode],
    train: &TrainConfig,
    infer: &InferConfig,
) -> Result<Vec<EvalReport>, PipelineError> {
    let mut reports = Vec::new();
    for &mode in modes {
        let cfg = TrainConfig { combine: mode, ..train.clone() };
        let (model, _) = train_model(train_records, train_store, &cfg)?;
        let icfg = InferConfig { combine: mode, ..infer.clone() };
        for ds in datasets {
            let scores = score_videos(&ds.records, &ds.store, &model, &icfg)?;
            let echo = ConfigEcho {
                label: mode.display_name().to_string(),
                mode: Some(mode.name().to_string()),
                components: Some(cfg.gmm.n_components),
                seed: Some(cfg.seed),
            };
            reports.push(evaluate(ds.name.clone(), &to_scored_samples(&scores)?, echo)?);
        }
    }
    Ok(reports)
}
