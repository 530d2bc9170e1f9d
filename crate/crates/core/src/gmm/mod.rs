//! Gaussian mixture anomaly model fitted by EM.
//!
//! Scores are negative log densities, so larger means more anomalous.

mod io;
pub mod linalg;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::diffcomb::CombinedFeature;
use crate::rng::rng_from;

pub use io::{load_model, save_model, MODEL_MAGIC};

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("need at least {needed} distinct points, got {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("point {index} has length {found}, expected {expected}")]
    DimMismatch { index: usize, expected: usize, found: usize },
    #[error("non-finite value at component {index}")]
    NonFinite { index: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a mixture model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file truncated")]
    Truncated,
    #[error("{0} trailing bytes after model payload")]
    TrailingBytes(usize),
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceType {
    #[default]
    Diagonal,
    Full,
}

impl FromStr for CovarianceType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diag" | "diagonal" => Ok(CovarianceType::Diagonal),
            "full" => Ok(CovarianceType::Full),
            _ => Err(format!("unknown covariance type `{s}` (expected diag or full)")),
        }
    }
}

impl fmt::Display for CovarianceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceType::Diagonal => "diag",
            CovarianceType::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub n_components: usize,
    pub covariance: CovarianceType,
    /// Relative change of the mean log-likelihood that ends EM.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub variance_floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            n_components: 3,
            covariance: CovarianceType::Diagonal,
            tol: 1e-6,
            max_iter: 200,
            seed: 0,
            variance_floor: VARIANCE_FLOOR,
        }
    }
}

impl GmmConfig {
    fn validate(&self) -> Result<(), GmmError> {
        if self.n_components == 0 {
            return Err(GmmError::Config("n_components must be positive".into()));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(GmmError::Config(format!("tol must be non-negative, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(GmmError::Config("max_iter must be positive".into()));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(GmmError::Config("variance floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub seed: u64,
    pub iterations: usize,
    /// Total log-likelihood of the training data under the returned model.
    pub final_log_likelihood: f64,
    pub converged: bool,
    pub variance_floor_engaged: bool,
}

/// Per-iteration diagnostics from [`fit_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Total log-likelihood at each E-step, starting from the initial
    /// parameters.
    pub log_likelihoods: Vec<f64>,
    /// Largest `|sum_k r_ik - 1|` seen over all E-steps.
    pub max_responsibility_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariances {
    /// One length-`d` variance vector per component.
    Diagonal(Vec<Vec<f64>>),
    /// One row-major `d * d` matrix per component.
    Full(Vec<Vec<f64>>),
}

impl Covariances {
    pub fn kind(&self) -> CovarianceType {
        match self {
            Covariances::Diagonal(_) => CovarianceType::Diagonal,
            Covariances::Full(_) => CovarianceType::Full,
        }
    }
}

/// Precomputed per-component terms for density evaluation.
#[derive(Debug, Clone, PartialEq)]
enum Precision {
    /// Inverse variances.
    Diagonal(Vec<f64>),
    /// Cholesky factor of the covariance.
    Full(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Covariances,
    fit: Option<FitMetadata>,
    log_weights: Vec<f64>,
    log_norms: Vec<f64>,
    precisions: Vec<Precision>,
}

/// Anything that maps a combined feature to an anomaly score.
pub trait AnomalyModel: Send + Sync {
    fn dim(&self) -> usize;
    /// Larger is more anomalous.
    fn score(&self, x: &[f64]) -> Result<f64, GmmError>;
}

impl AnomalyModel for GmmModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: &[f64]) -> Result<f64, GmmError> {
        self.pair_score(x)
    }
}

impl GmmModel {
    /// Builds a model from explicit parameters.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Covariances) -> Result<Self, GmmError> {
        let n = weights.len();
        if n == 0 || means.len() != n {
            return Err(GmmError::InvalidModel(format!("{} weights for {} means", n, means.len())));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(GmmError::InvalidModel("means must share a positive length".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(GmmError::InvalidModel("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::InvalidModel(format!("weights sum to {total}")));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GmmError::InvalidModel("non-finite mean".into()));
        }
        let mut log_norms = Vec::with_capacity(n);
        let mut precisions = Vec::with_capacity(n);
        let base = -0.5 * dim as f64 * (2.0 * PI).ln();
        match &covariances {
            Covariances::Diagonal(vars) => {
                if vars.len() != n || vars.iter().any(|v| v.len() != dim) {
                    return Err(GmmError::InvalidModel("variance shape".into()));
                }
                for v in vars {
                    if v.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
                        return Err(GmmError::InvalidModel("variances must be positive and finite".into()));
                    }
                    log_norms.push(base - 0.5 * v.iter().map(|s| s.ln()).sum::<f64>());
                    precisions.push(Precision::Diagonal(v.iter().map(|s| 1.0 / s).collect()));
                }
            }
            Covariances::Full(covs) => {
                if covs.len() != n || covs.iter().any(|c| c.len() != dim * dim) {
                    return Err(GmmError::InvalidModel("covariance shape".into()));
                }
                for c in covs {
                    let l = linalg::cholesky(c, dim)
                        .ok_or_else(|| GmmError::InvalidModel("covariance not positive definite".into()))?;
                    log_norms.push(base - (0..dim).map(|i| l[i * dim + i].ln()).sum::<f64>());
                    precisions.push(Precision::Full(l));
                }
            }
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { dim, weights, means, covariances, fit: None, log_weights, log_norms, precisions })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &Covariances {
        &self.covariances
    }

    /// Diagonal of each component covariance.
    pub fn variances(&self) -> Vec<Vec<f64>> {
        match &self.covariances {
            Covariances::Diagonal(v) => v.clone(),
            Covariances::Full(c) => c.iter().map(|m| (0..self.dim).map(|i| m[i * self.dim + i]).collect()).collect(),
        }
    }

    pub fn fit_metadata(&self) -> Option<&FitMetadata> {
        self.fit.as_ref()
    }

    /// `log N(x | mu_k, Sigma_k)` for component `k`, without the weight.
    fn component_log_pdf(&self, k: usize, x: &[f64]) -> f64 {
        let mu = &self.means[k];
        let quad = match &self.precisions[k] {
            Precision::Diagonal(inv) => x.iter().zip(mu).zip(inv).map(|((a, m), p)| (a - m) * (a - m) * p).sum::<f64>(),
            Precision::Full(l) => {
                let diff: Vec<f64> = x.iter().zip(mu).map(|(a, m)| a - m).collect();
                linalg::forward_solve(l, self.dim, &diff).iter().map(|z| z * z).sum()
            }
        };
        self.log_norms[k] - 0.5 * quad
    }

    /// Weighted per-component log terms; zero-weight components give -inf.
    fn weighted_log_terms(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = if self.weights[k] > 0.0 { self.log_weights[k] + self.component_log_pdf(k, x) } else { f64::NEG_INFINITY };
        }
    }

    /// Log of the mixture density at `x`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64, GmmError> {
        if x.len() != self.dim {
            return Err(GmmError::DimMismatch { index: 0, expected: self.dim, found: x.len() });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(GmmError::NonFinite { index: i });
        }
        let mut terms = vec![0.0; self.n_components()];
        self.weighted_log_terms(x, &mut terms);
        Ok(log_sum_exp(&terms))
    }

    /// Anomaly score: `-log_density(x)`.
    pub fn pair_score(&self, x: &[f64]) -> Result<f64, GmmError> {
        Ok(-self.log_density(x)?)
    }

    pub fn score_feature(&self, f: &CombinedFeature) -> Result<f64, GmmError> {
        self.pair_score(&f.values)
    }

    fn shifted(self, offset: &[f64]) -> Result<Self, GmmError> {
        let means = self.means.iter().map(|m| m.iter().zip(offset).map(|(a, b)| a + b).collect()).collect();
        let fit = self.fit.clone();
        let mut model = GmmModel::new(self.weights, means, self.covariances)?;
        model.fit = fit;
        Ok(model)
    }
}

/// Max-shifted log-sum-exp. All `-inf` gives `-inf`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Fits a mixture to `data` with EM.
pub fn fit(data: &[Vec<f64>], cfg: &GmmConfig) -> Result<GmmModel, GmmError> {
    fit_traced(data, cfg).map(|(m, _)| m)
}

pub fn fit_features(data: &[CombinedFeature], cfg: &GmmConfig) -> Result<GmmModel, GmmError> {
    let rows: Vec<Vec<f64>> = data.iter().map(|f| f.values.clone()).collect();
    fit(&rows, cfg)
}

/// [`fit`] that also returns the log-likelihood trace.
pub fn fit_traced(data: &[Vec<f64>], cfg: &GmmConfig) -> Result<(GmmModel, FitTrace), GmmError> {
    cfg.validate()?;
    let n = data.len();
    let k = cfg.n_components;
    let d = data.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(GmmError::InsufficientData { needed: k, found: 0 });
    }
    for (i, row) in data.iter().enumerate() {
        if row.len() != d {
            return Err(GmmError::DimMismatch { index: i, expected: d, found: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GmmError::NonFinite { index: i });
        }
    }
    let distinct = count_distinct(data);
    if distinct < k {
        return Err(GmmError::InsufficientData { needed: k, found: distinct });
    }

    // Work on centered data; the center is added back to the means.
    let center = column_means(data, d);
    let x: Vec<f64> = data.iter().flat_map(|r| r.iter().zip(&center).map(|(v, c)| v - c)).collect();
    let variance = column_variances(&x, n, d);
    let floor_engaged = variance.iter().any(|&v| v < cfg.variance_floor);
    if floor_engaged {
        log::warn!("variance floor {} engaged on training data", cfg.variance_floor);
    }
    let init_var: Vec<f64> = variance.iter().map(|v| v.max(cfg.variance_floor)).collect();

    if k == 1 {
        return fit_single(data, &center, cfg);
    }

    let means = kmeans_pp(&x, n, d, k, cfg.seed);
    let covs = match cfg.covariance {
        CovarianceType::Diagonal => Covariances::Diagonal(vec![init_var.clone(); k]),
        CovarianceType::Full => {
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                m[i * d + i] = init_var[i];
            }
            Covariances::Full(vec![m; k])
        }
    };
    let mut model = GmmModel::new(vec![1.0 / k as f64; k], means, covs)?;

    let mut trace = FitTrace { log_likelihoods: Vec::new(), max_responsibility_error: 0.0 };
    let mut resp = vec![0.0; n * k];
    let mut converged = false;
    let mut iterations = 0;
    let mut ll = e_step(&model, &x, d, &mut resp, &mut trace.max_responsibility_error);
    trace.log_likelihoods.push(ll);
    while iterations < cfg.max_iter {
        iterations += 1;
        model = m_step(&model, &x, n, d, &resp, cfg.variance_floor)?;
        let next = e_step(&model, &x, d, &mut resp, &mut trace.max_responsibility_error);
        trace.log_likelihoods.push(next);
        let rel = (next - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        ll = next;
        if rel < cfg.tol {
            converged = true;
            break;
        }
    }
    log::debug!("EM stopped after {iterations} iterations, log-likelihood {ll}");
    let mut model = model.shifted(&center)?;
    model.fit = Some(FitMetadata {
        seed: cfg.seed,
        iterations,
        final_log_likelihood: ll,
        converged,
        variance_floor_engaged: floor_engaged,
    });
    Ok((model, trace))
}

/// One component has a closed-form maximum-likelihood fit.
fn fit_single(data: &[Vec<f64>], mean: &[f64], cfg: &GmmConfig) -> Result<(GmmModel, FitTrace), GmmError> {
    let d = mean.len();
    let mut var = vec![0.0; d];
    for row in data {
        for ((a, v), m) in var.iter_mut().zip(row).zip(mean) {
            *a += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|a| *a /= data.len() as f64);
    let floor_engaged = var.iter().any(|&v| v < cfg.variance_floor);
    let var: Vec<f64> = var.iter().map(|v| v.max(cfg.variance_floor)).collect();
    let covs = match cfg.covariance {
        CovarianceType::Diagonal => Covariances::Diagonal(vec![var]),
        CovarianceType::Full => {
            let mut m = vec![0.0; d * d];
            for row in data {
                for i in 0..d {
                    for j in 0..d {
                        m[i * d + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                    }
                }
            }
            m.iter_mut().for_each(|v| *v /= data.len() as f64);
            Covariances::Full(vec![linalg::clip_eigenvalues(&m, d, cfg.variance_floor)])
        }
    };
    let mut model = GmmModel::new(vec![1.0], vec![mean.to_vec()], covs)?;
    let ll: f64 = data.iter().map(|r| model.component_log_pdf(0, r)).sum();
    model.fit = Some(FitMetadata {
        seed: cfg.seed,
        iterations: 1,
        final_log_likelihood: ll,
        converged: true,
        variance_floor_engaged: floor_engaged,
    });
    Ok((model, FitTrace { log_likelihoods: vec![ll], max_responsibility_error: 0.0 }))
}

fn count_distinct(data: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = data.iter().map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn column_means(data: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d];
    for row in data {
        for (a, v) in m.iter_mut().zip(row) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|a| *a /= data.len() as f64);
    m
}

fn column_variances(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for row in x.chunks_exact(d) {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    let mut var = vec![0.0; d];
    for row in x.chunks_exact(d) {
        for ((a, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *a += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|a| *a /= n as f64);
    var
}

/// k-means++ seeding: first center uniform, the rest drawn with probability
/// proportional to squared distance to the nearest chosen center.
fn kmeans_pp(x: &[f64], n: usize, d: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed);
    let row = |i: usize| &x[i * d..(i + 1) * d];
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let mut centers = vec![row(rng.gen_range(0..n)).to_vec()];
    let mut best: Vec<f64> = (0..n).map(|i| dist2(row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, &b) in best.iter().enumerate() {
            if b > 0.0 && target < b {
                pick = i;
                break;
            }
            target -= b;
        }
        if best[pick] == 0.0 {
            pick = best.iter().rposition(|&b| b > 0.0).expect("distinct points remain");
        }
        let c = row(pick).to_vec();
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(dist2(row(i), &c));
        }
        centers.push(c);
    }
    centers
}

/// Fills `resp` (row-major `n * k`) and returns the total log-likelihood.
/// Rows are computed in parallel; the sum runs in index order.
fn e_step(model: &GmmModel, x: &[f64], d: usize, resp: &mut [f64], max_err: &mut f64) -> f64 {
    let k = model.n_components();
    let per_point: Vec<(f64, f64)> = resp
        .par_chunks_mut(k)
        .zip(x.par_chunks(d))
        .map(|(r, xi)| {
            model.weighted_log_terms(xi, r);
            let lse = log_sum_exp(r);
            let mut sum = 0.0;
            for v in r.iter_mut() {
                *v = (*v - lse).exp();
                sum += *v;
            }
            (lse, (sum - 1.0).abs())
        })
        .collect();
    let mut ll = 0.0;
    for (lse, err) in per_point {
        ll += lse;
        *max_err = max_err.max(err);
    }
    ll
}

fn m_step(model: &GmmModel, x: &[f64], n: usize, d: usize, resp: &[f64], floor: f64) -> Result<GmmModel, GmmError> {
    let k = model.n_components();
    let mut nk = vec![0.0; k];
    for r in resp.chunks_exact(k) {
        for (a, v) in nk.iter_mut().zip(r) {
            *a += v;
        }
    }
    let total: f64 = nk.iter().sum();
    let weights: Vec<f64> = nk.iter().map(|v| v / total).collect();
    let mut means = model.means.clone();
    let mut covs = model.covariances.clone();
    for c in 0..k {
        // A component that lost every point keeps its parameters at weight 0.
        if nk[c] <= 0.0 {
            continue;
        }
        let mut mu = vec![0.0; d];
        for i in 0..n {
            let r = resp[i * k + c];
            for (m, v) in mu.iter_mut().zip(&x[i * d..(i + 1) * d]) {
                *m += r * v;
            }
        }
        mu.iter_mut().for_each(|m| *m /= nk[c]);
        match &mut covs {
            Covariances::Diagonal(vars) => {
                let mut var = vec![0.0; d];
                for i in 0..n {
                    let r = resp[i * k + c];
                    for j in 0..d {
                        let diff = x[i * d + j] - mu[j];
                        var[j] += r * diff * diff;
                    }
                }
                vars[c] = var.iter().map(|v| (v / nk[c]).max(floor)).collect();
            }
            Covariances::Full(mats) => {
                let mut m = vec![0.0; d * d];
                for i in 0..n {
                    let r = resp[i * k + c];
                    let row = &x[i * d..(i + 1) * d];
                    for a in 0..d {
                        let da = r * (row[a] - mu[a]);
                        for b in 0..=a {
                            m[a * d + b] += da * (row[b] - mu[b]);
                        }
                    }
                }
                for a in 0..d {
                    for b in 0..=a {
                        let v = m[a * d + b] / nk[c];
                        m[a * d + b] = v;
                        m[b * d + a] = v;
                    }
                }
                mats[c] = linalg::clip_eigenvalues(&m, d, floor);
            }
        }
        means[c] = mu;
    }
    GmmModel::new(weights, means, covs)
}
