//! ROC AUC with midrank ties, and result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("AUC needs both classes, got {n_pos} positives and {n_neg} negatives")]
    SingleClass { n_pos: usize, n_neg: usize },
    #[error("sample `{id}` has non-finite score {score}")]
    NonFinite { id: String, score: f64 },
    #[error("sample `{id}` has label {label}; expected 0 or 1")]
    BadLabel { id: String, label: u8 },
}

/// One scored item. Label 1 is the positive (fake) class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub score: f64,
    pub label: u8,
}

impl ScoredSample {
    pub fn new(id: impl Into<String>, score: f64, label: u8) -> Self {
        Self { id: id.into(), score, label }
    }
}

fn check(samples: &[ScoredSample]) -> Result<(usize, usize), EvalError> {
    let mut n_pos = 0;
    for s in samples {
        if !s.score.is_finite() {
            return Err(EvalError::NonFinite { id: s.id.clone(), score: s.score });
        }
        match s.label {
            0 => {}
            1 => n_pos += 1,
            l => return Err(EvalError::BadLabel { id: s.id.clone(), label: l }),
        }
    }
    let n_neg = samples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass { n_pos, n_neg });
    }
    Ok((n_pos, n_neg))
}

/// Mann-Whitney AUC from midranks, `O(n log n)`. Exactly equal scores share
/// their average rank, which counts each tied positive-negative pair as 1/2.
pub fn auc(samples: &[ScoredSample]) -> Result<f64, EvalError> {
    let (n_pos, n_neg) = check(samples)?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].score.total_cmp(&samples[b].score));
    // Ranks are 1-based; doubled so midranks stay integral.
    let mut pos_rank2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && samples[order[j + 1]].score == samples[order[i]].score {
            j += 1;
        }
        let mid2 = (i + 1 + j + 1) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| samples[k].label == 1).count() as u128;
        pos_rank2 += mid2 * pos_in_group;
        i = j + 1;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    let u2 = pos_rank2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// Direct `O(n^2)` pair count. Reference for [`auc`].
pub fn auc_pairwise(samples: &[ScoredSample]) -> Result<f64, EvalError> {
    let (n_pos, n_neg) = check(samples)?;
    let mut twice: u128 = 0;
    for p in samples.iter().filter(|s| s.label == 1) {
        for q in samples.iter().filter(|s| s.label == 0) {
            twice += if p.score > q.score {
                2
            } else if p.score == q.score {
                1
            } else {
                0
            };
        }
    }
    Ok(twice as f64 / (2 * n_pos as u128 * n_neg as u128) as f64)
}

/// Identifies the configuration that produced a result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    /// Row label in rendered tables, e.g. the combination mode.
    pub label: String,
    pub mode: Option<String>,
    pub components: Option<usize>,
    pub seed: Option<u64>,
}

impl ConfigEcho {
    pub fn labeled(label: impl Into<String>) -> Self {
        Self { label: label.into(), mode: None, components: None, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub n_pos: usize,
    pub n_neg: usize,
    pub auc: f64,
    pub config: ConfigEcho,
}

pub fn evaluate(dataset: impl Into<String>, samples: &[ScoredSample], config: ConfigEcho) -> Result<EvalReport, EvalError> {
    let (n_pos, n_neg) = check(samples)?;
    Ok(EvalReport { dataset: dataset.into(), n_pos, n_neg, auc: auc(samples)?, config })
}

/// AUC of a validation set with pseudo-fakes as the positive class.
pub fn validate_backbone_protocol(real_scores: &[f64], pseudo_scores: &[f64]) -> Result<EvalReport, EvalError> {
    let samples: Vec<ScoredSample> = real_scores
        .iter()
        .enumerate()
        .map(|(i, &s)| ScoredSample::new(format!("real-{i}"), s, 0))
        .chain(pseudo_scores.iter().enumerate().map(|(i, &s)| ScoredSample::new(format!("pseudo-{i}"), s, 1)))
        .collect();
    evaluate("validation", &samples, ConfigEcho::labeled("backbone"))
}

/// Renders reports as a table of AUC percentages: one row per config label,
/// one column per dataset (first-seen order) and a trailing average.
pub fn render_report(reports: &[EvalReport]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut rows: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in reports {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
        if !rows.contains(&r.config.label.as_str()) {
            rows.push(&r.config.label);
        }
        cells.insert((r.config.label.as_str(), r.dataset.as_str()), r.auc * 100.0);
    }

    let mut header = vec!["".to_string()];
    header.extend(datasets.iter().map(|d| d.to_string()));
    header.push("Avg.".into());
    let mut table = vec![header];
    for row in &rows {
        let vals: Vec<Option<f64>> = datasets.iter().map(|d| cells.get(&(*row, *d)).copied()).collect();
        let present: Vec<f64> = vals.iter().flatten().copied().collect();
        let avg = present.iter().sum::<f64>() / present.len() as f64;
        let mut line = vec![row.to_string()];
        line.extend(vals.iter().map(|v| v.map_or("-".into(), |x| format!("{x:.1}"))));
        line.push(format!("{avg:.1}"));
        table.push(line);
    }

    let widths: Vec<usize> =
        (0..table[0].len()).map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, line) in table.iter().enumerate() {
        let mut text = String::new();
        for (c, cell) in line.iter().enumerate() {
            if c == 0 {
                let _ = write!(text, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(text, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(text.trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}
