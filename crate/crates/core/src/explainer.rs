//! Sentence-level attribution by masked sampling.
//!
//! Each iteration masks a random subset of sentences (each independently with
//! probability `p`), replacing every masked sentence with the mask token, and
//! scores the perturbed document. A sentence's importance for a label is the
//! mean label probability over iterations where it was left unmasked minus the
//! mean over iterations where it was masked.
//!
//! [`explain_exhaustive`] computes the same difference over every mask pattern
//! and is the value the sampled estimate converges to at `p = 0.5`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ScoreMatrix, Scorer};
use crate::corpus::Document;
use crate::error::{Error, Result};

/// Largest document accepted by [`explain_exhaustive`] (2^16 scorer calls).
pub const MAX_EXHAUSTIVE_SENTENCES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MspConfig {
    pub iterations: usize,
    pub mask_probability: f64,
    pub mask_token: String,
    pub seed: u64,
    /// Forced top-up iterations for a sentence never seen in one of its states.
    pub min_count_guard: usize,
    /// Perturbed texts per scorer call.
    pub batch_size: usize,
}

impl Default for MspConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            mask_probability: 0.1,
            mask_token: "[MASK]".to_string(),
            seed: 0,
            min_count_guard: 5,
            batch_size: 256,
        }
    }
}

impl MspConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.iterations == 0 {
            problems.push("iterations must be at least 1".to_string());
        }
        if !(self.mask_probability > 0.0 && self.mask_probability < 1.0) {
            problems.push(format!("mask_probability must lie in (0, 1), got {}", self.mask_probability));
        }
        if self.min_count_guard == 0 {
            problems.push("min_count_guard must be positive".to_string());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Sentence × label importance scores for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMatrix {
    pub doc_id: String,
    /// Label codes in column order.
    pub labels: Vec<String>,
    /// `scores[sentence][label]`.
    pub scores: Vec<Vec<f64>>,
    pub counts_masked: Vec<usize>,
    pub counts_unmasked: Vec<usize>,
    /// `"msp"` or `"exhaustive"`.
    pub method: String,
    /// Echo of the sampling configuration; absent for exhaustive runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<MspConfig>,
}

impl ImportanceMatrix {
    pub fn n_sentences(&self) -> usize {
        self.scores.len()
    }

    /// Column of `code`, if present.
    pub fn column(&self, code: &str) -> Option<Vec<f64>> {
        let j = self.labels.iter().position(|l| l == code)?;
        Some(self.scores.iter().map(|row| row[j]).collect())
    }
}

/// The document text with every masked sentence replaced by `mask_token`.
pub fn perturb(doc: &Document, masked: &[bool], mask_token: &str) -> String {
    let mut out = String::with_capacity(doc.text.len());
    let mut cursor = 0;
    for (s, &m) in doc.sentences.iter().zip(masked) {
        let (b0, b1) = (doc.byte_offset(s.start), doc.byte_offset(s.end));
        out.push_str(&doc.text[cursor..b0]);
        out.push_str(if m { mask_token } else { &doc.text[b0..b1] });
        cursor = b1;
    }
    out.push_str(&doc.text[cursor..]);
    out
}

/// Masked-sampling explanation of `doc` under `scorer`.
pub fn explain(doc: &Document, scorer: &dyn Scorer, cfg: &MspConfig) -> Result<ImportanceMatrix> {
    cfg.validate()?;
    let m = doc.sentences.len();
    if m == 0 {
        return Err(Error::InvalidInput(format!("document {:?} has no sentences", doc.doc_id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = cfg.mask_probability;
    let draw = |rng: &mut ChaCha8Rng| -> Vec<bool> { (0..m).map(|_| rng.random::<f64>() < p).collect() };

    let mut patterns: Vec<Vec<bool>> = (0..cfg.iterations).map(|_| draw(&mut rng)).collect();
    let mut masked = vec![0usize; m];
    for pat in &patterns {
        for (c, &b) in masked.iter_mut().zip(pat) {
            *c += b as usize;
        }
    }
    for s in 0..m {
        for force in [true, false] {
            let observed = if force { masked[s] } else { patterns.len() - masked[s] };
            if observed > 0 {
                continue;
            }
            for _ in 0..cfg.min_count_guard {
                let mut pat = draw(&mut rng);
                pat[s] = force;
                for (c, &b) in masked.iter_mut().zip(&pat) {
                    *c += b as usize;
                }
                patterns.push(pat);
            }
        }
    }

    let scores = score_patterns(doc, scorer, &patterns, &cfg.mask_token, cfg.batch_size)?;
    let mut out = tally(doc, scorer.labels(), &patterns, &scores)?;
    out.method = "msp".to_string();
    out.config = Some(cfg.clone());
    Ok(out)
}

/// Exact importance over all `2^m` mask patterns. Documents are limited to
/// [`MAX_EXHAUSTIVE_SENTENCES`] sentences.
pub fn explain_exhaustive(doc: &Document, scorer: &dyn Scorer, mask_token: &str) -> Result<ImportanceMatrix> {
    let m = doc.sentences.len();
    if m == 0 {
        return Err(Error::InvalidInput(format!("document {:?} has no sentences", doc.doc_id)));
    }
    if m > MAX_EXHAUSTIVE_SENTENCES {
        return Err(Error::DocumentTooLarge {
            doc_id: doc.doc_id.clone(),
            sentences: m,
            max: MAX_EXHAUSTIVE_SENTENCES,
        });
    }
    let patterns: Vec<Vec<bool>> = (0u32..1 << m)
        .map(|bits| (0..m).map(|s| bits >> s & 1 == 1).collect())
        .collect();
    let scores = score_patterns(doc, scorer, &patterns, mask_token, 256)?;
    let mut out = tally(doc, scorer.labels(), &patterns, &scores)?;
    out.method = "exhaustive".to_string();
    Ok(out)
}

fn score_patterns(
    doc: &Document,
    scorer: &dyn Scorer,
    patterns: &[Vec<bool>],
    mask_token: &str,
    batch_size: usize,
) -> Result<Vec<ScoreMatrix>> {
    let n_labels = scorer.labels().len();
    patterns
        .par_chunks(batch_size)
        .enumerate()
        .map(|(b, chunk)| {
            let first = b * batch_size;
            let texts: Vec<String> = chunk.iter().map(|pat| perturb(doc, pat, mask_token)).collect();
            let wrap = |source: Error| Error::Explain { iteration: first, source: Box::new(source) };
            let sm = scorer.score(&texts).map_err(wrap)?;
            if sm.n_rows() != texts.len() || sm.n_cols() != n_labels {
                return Err(wrap(Error::Scorer {
                    batch: b,
                    message: format!(
                        "expected {}x{} scores, got {}x{}",
                        texts.len(),
                        n_labels,
                        sm.n_rows(),
                        sm.n_cols()
                    ),
                }));
            }
            Ok(sm)
        })
        .collect()
}

fn tally(doc: &Document, labels: &[String], patterns: &[Vec<bool>], batches: &[ScoreMatrix]) -> Result<ImportanceMatrix> {
    let m = doc.sentences.len();
    let l = labels.len();
    // running means, exact when every observation is equal
    let mut mean_masked = vec![vec![0.0; l]; m];
    let mut mean_unmasked = vec![vec![0.0; l]; m];
    let mut counts_masked = vec![0usize; m];
    let mut counts_unmasked = vec![0usize; m];
    let rows = batches.iter().flat_map(|b| b.rows());
    for (pat, row) in patterns.iter().zip(rows) {
        for (s, &is_masked) in pat.iter().enumerate() {
            let (means, counts) = if is_masked {
                (&mut mean_masked[s], &mut counts_masked[s])
            } else {
                (&mut mean_unmasked[s], &mut counts_unmasked[s])
            };
            *counts += 1;
            let k = *counts as f64;
            for (acc, v) in means.iter_mut().zip(row) {
                *acc += (v - *acc) / k;
            }
        }
    }
    for s in 0..m {
        for (count, state) in [(counts_masked[s], "masked"), (counts_unmasked[s], "unmasked")] {
            if count == 0 {
                return Err(Error::DegenerateTally { doc_id: doc.doc_id.clone(), sentence: s, state });
            }
        }
    }
    let scores = (0..m)
        .map(|s| {
            (0..l)
                .map(|j| mean_unmasked[s][j] - mean_masked[s][j])
                .collect()
        })
        .collect();
    Ok(ImportanceMatrix {
        doc_id: doc.doc_id.clone(),
        labels: labels.to_vec(),
        scores,
        counts_masked,
        counts_unmasked,
        method: String::new(),
        config: None,
    })
}

/// Per-document seed derived from the run seed and the document id, so a
/// document's explanation does not depend on its position in the corpus.
pub fn document_seed(seed: u64, doc_id: &str) -> u64 {
    // FNV-1a over the id, mixed with the run seed.
    let mut h: u64 = 0xcbf29ce484222325 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for b in doc_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Explains every document with at least one sentence, in corpus order.
pub fn explain_all(docs: &[Document], scorer: &dyn Scorer, cfg: &MspConfig) -> Result<Vec<ImportanceMatrix>> {
    cfg.validate()?;
    docs.par_iter()
        .filter(|d| !d.sentences.is_empty())
        .map(|d| {
            let cfg = MspConfig { seed: document_seed(cfg.seed, &d.doc_id), ..cfg.clone() };
            explain(d, scorer, &cfg)
        })
        .collect()
}
