//! TF-IDF features with one logistic regression per label.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sigmoid, ScoreMatrix, Scorer};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const MODEL_SCHEMA_VERSION: &str = "xaiqa-linear/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Step size. With full-batch training this is the initial step of a
    /// backtracking line search; with mini-batches it is used as-is.
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains on the full batch every epoch.
    pub batch_size: Option<usize>,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 200,
            batch_size: None,
            l2: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidConfig(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelParams {
    pub schema_version: String,
    /// Label codes, in vocabulary order.
    pub labels: Vec<String>,
    pub vocab: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    /// `labels × features`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Labels without a positive training example; left at their initial parameters.
    pub excluded_labels: Vec<String>,
    pub train_config: TrainConfig,
    /// Training-set loss before the first epoch and after every epoch.
    pub loss_history: Vec<f64>,
}

/// The builtin scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    params: LinearModelParams,
}

type Features = Vec<(usize, f64)>;

impl LinearModel {
    pub fn from_params(params: LinearModelParams) -> Result<Self> {
        if params.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model schema {:?}, expected {MODEL_SCHEMA_VERSION:?}",
                params.schema_version
            )));
        }
        let n_features = params.vocab.len();
        let shape_ok = params.idf.len() == n_features
            && params.weights.len() == params.labels.len()
            && params.bias.len() == params.labels.len()
            && params.weights.iter().all(|w| w.len() == n_features)
            && params.vocab.values().all(|&c| c < n_features);
        if !shape_ok {
            return Err(Error::InvalidInput("model parameter shapes are inconsistent".into()));
        }
        let finite = params.idf.iter().chain(&params.bias).chain(params.weights.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("model parameters contain non-finite values".into()));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &LinearModelParams {
        &self.params
    }

    pub fn into_params(self) -> LinearModelParams {
        self.params
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.params)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_params(serde_json::from_str(&raw)?)
    }

    /// Trains on every document of `corpus` against its vocabulary.
    pub fn train(corpus: &Corpus, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if corpus.documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let n_docs = corpus.documents.len();
        let token_lists: Vec<Vec<String>> = corpus.documents.iter().map(|d| tokenize(&d.text)).collect();

        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for tokens in &token_lists {
            let mut uniq: Vec<&String> = tokens.iter().collect();
            uniq.sort();
            uniq.dedup();
            for t in uniq {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let vocab: BTreeMap<String, usize> = df.keys().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let idf: Vec<f64> = df
            .values()
            .map(|&d| ((1.0 + n_docs as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let n_features = vocab.len();

        let labels = corpus.vocabulary.codes();
        let mut params = LinearModelParams {
            schema_version: MODEL_SCHEMA_VERSION.to_string(),
            labels: labels.clone(),
            vocab,
            idf,
            weights: vec![vec![0.0; n_features]; labels.len()],
            bias: vec![0.0; labels.len()],
            excluded_labels: Vec::new(),
            train_config: cfg.clone(),
            loss_history: Vec::new(),
        };

        let xs: Vec<Features> = token_lists.iter().map(|t| featurize_tokens(&params, t)).collect();
        let ys: Vec<Vec<f64>> = labels
            .iter()
            .map(|code| {
                corpus
                    .assignments
                    .iter()
                    .map(|a| if a.has_label(code) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let trainable: Vec<bool> = ys.iter().map(|y| y.iter().any(|&v| v > 0.0)).collect();
        for (code, _) in labels.iter().zip(&trainable).filter(|(_, t)| !**t) {
            log::warn!("label {code} has no positive training example; excluded from training");
            params.excluded_labels.push(code.clone());
        }

        let total_loss = |params: &LinearModelParams| -> f64 {
            let sum: f64 = (0..labels.len())
                .map(|j| label_loss(&xs, &ys[j], &params.weights[j], params.bias[j], cfg.l2, None))
                .sum();
            sum / labels.len().max(1) as f64
        };
        params.loss_history.push(total_loss(&params));

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..n_docs).collect();
        let mut steps = vec![cfg.learning_rate; labels.len()];
        for epoch in 0..cfg.epochs {
            match cfg.batch_size {
                None => {
                    for j in (0..labels.len()).filter(|&j| trainable[j]) {
                        steps[j] = line_search_step(&xs, &ys[j], &mut params.weights[j], &mut params.bias[j], cfg, steps[j])
                            .ok_or(Error::NonFiniteLoss { epoch, batch: 0 })?;
                    }
                }
                Some(bs) => {
                    order.shuffle(&mut rng);
                    for (batch, idx) in order.chunks(bs).enumerate() {
                        for j in (0..labels.len()).filter(|&j| trainable[j]) {
                            let (gw, gb) = gradient(&xs, &ys[j], &params.weights[j], params.bias[j], cfg.l2, Some(idx));
                            for (w, g) in params.weights[j].iter_mut().zip(&gw) {
                                *w -= cfg.learning_rate * g;
                            }
                            params.bias[j] -= cfg.learning_rate * gb;
                            if !params.bias[j].is_finite() || params.weights[j].iter().any(|w| !w.is_finite()) {
                                return Err(Error::NonFiniteLoss { epoch, batch });
                            }
                        }
                    }
                }
            }
            let loss = total_loss(&params);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: 0 });
            }
            params.loss_history.push(loss);
        }
        Self::from_params(params)
    }

    /// Sparse TF-IDF feature vector of `text`; unknown terms are dropped.
    pub fn featurize(&self, text: &str) -> Vec<(usize, f64)> {
        featurize_tokens(&self.params, &tokenize(text))
    }

    fn score_one(&self, text: &str) -> Vec<f64> {
        let x = self.featurize(text);
        self.params
            .weights
            .iter()
            .zip(&self.params.bias)
            .map(|(w, b)| sigmoid(dot(&x, w) + b))
            .collect()
    }
}

impl Scorer for LinearModel {
    fn labels(&self) -> &[String] {
        &self.params.labels
    }

    fn score(&self, texts: &[String]) -> Result<ScoreMatrix> {
        let rows: Vec<Vec<f64>> = texts.par_iter().map(|t| self.score_one(t)).collect();
        ScoreMatrix::from_rows(self.params.labels.len(), rows)
    }
}

fn featurize_tokens(params: &LinearModelParams, tokens: &[String]) -> Features {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tokens {
        if let Some(&col) = params.vocab.get(t) {
            *counts.entry(col).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(col, n)| (col, (1.0 + (n as f64).ln()) * params.idf[col]))
        .collect()
}

fn dot(x: &[(usize, f64)], w: &[f64]) -> f64 {
    x.iter().map(|&(c, v)| v * w[c]).sum()
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn label_loss(xs: &[Features], y: &[f64], w: &[f64], b: f64, l2: f64, idx: Option<&[usize]>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut visit = |i: usize| {
        let z = dot(&xs[i], w) + b;
        sum += softplus(z) - y[i] * z;
        n += 1;
    };
    match idx {
        Some(idx) => idx.iter().for_each(|&i| visit(i)),
        None => (0..xs.len()).for_each(&mut visit),
    }
    let reg: f64 = w.iter().map(|v| v * v).sum::<f64>() * 0.5 * l2;
    sum / n as f64 + reg
}

fn gradient(xs: &[Features], y: &[f64], w: &[f64], b: f64, l2: f64, idx: Option<&[usize]>) -> (Vec<f64>, f64) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    let mut n = 0usize;
    let mut visit = |i: usize| {
        let r = sigmoid(dot(&xs[i], w) + b) - y[i];
        for &(c, v) in &xs[i] {
            gw[c] += r * v;
        }
        gb += r;
        n += 1;
    };
    match idx {
        Some(idx) => idx.iter().for_each(|&i| visit(i)),
        None => (0..xs.len()).for_each(&mut visit),
    }
    let n = n as f64;
    for (g, wv) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wv;
    }
    (gw, gb / n)
}

/// One full-batch gradient step with Armijo backtracking, so the label's loss
/// never increases. Returns the accepted step (reused, doubled, as the next
/// initial step) or `None` on a non-finite loss.
fn line_search_step(xs: &[Features], y: &[f64], w: &mut [f64], b: &mut f64, cfg: &TrainConfig, prev_step: f64) -> Option<f64> {
    let loss0 = label_loss(xs, y, w, *b, cfg.l2, None);
    if !loss0.is_finite() {
        return None;
    }
    let (gw, gb) = gradient(xs, y, w, *b, cfg.l2, None);
    let gnorm2: f64 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
    if gnorm2 == 0.0 {
        return Some(prev_step);
    }
    let mut step = (prev_step * 2.0).min(cfg.learning_rate);
    let mut trial_w = w.to_vec();
    for _ in 0..60 {
        for ((t, wv), g) in trial_w.iter_mut().zip(w.iter()).zip(&gw) {
            *t = wv - step * g;
        }
        let trial_b = *b - step * gb;
        let loss = label_loss(xs, y, &trial_w, trial_b, cfg.l2, None);
        if loss.is_finite() && loss <= loss0 - 1e-4 * step * gnorm2 {
            w.copy_from_slice(&trial_w);
            *b = trial_b;
            return Some(step);
        }
        step *= 0.5;
    }
    // No acceptable step: the iterate is already stationary at machine precision.
    Some(prev_step)
}
