//! Query-context lexical overlap (QCLO) and hard-subset construction.
//!
//! `QCLO = |Q ∩ C| / |Q|` over the sets of filtered, stemmed words of the
//! question and the context. Low overlap marks a hard question.

mod porter;
mod stopwords;

pub use porter::porter_stem;
pub use stopwords::{ENGLISH_STOPWORDS, QUESTION_WORDS, STOPWORDS_VERSION};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// Hard-subset fractions reported by default.
pub const DEFAULT_FRACTIONS: [f64; 4] = [0.05, 0.10, 0.25, 0.50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcloConfig {
    pub stopwords: BTreeSet<String>,
    pub question_words: BTreeSet<String>,
    pub apply_stemming: bool,
}

impl Default for QcloConfig {
    fn default() -> Self {
        Self {
            stopwords: ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            question_words: QUESTION_WORDS.iter().map(|s| s.to_string()).collect(),
            apply_stemming: true,
        }
    }
}

impl QcloConfig {
    pub fn validate(&self) -> Result<()> {
        match self.stopwords.iter().chain(&self.question_words).find(|w| w.to_lowercase() != **w) {
            Some(w) => Err(Error::InvalidConfig(format!("filter word {w:?} is not lowercase"))),
            None => Ok(()),
        }
    }

    /// The filtered (and optionally stemmed) word set of `text`.
    pub fn normalize(&self, text: &str) -> BTreeSet<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| !self.stopwords.contains(t) && !self.question_words.contains(t))
            .map(|t| if self.apply_stemming { porter_stem(&t) } else { t })
            .collect()
    }
}

/// QCLO of a question against its context; `None` when no question word
/// survives filtering.
pub fn qclo(question: &str, context: &str, cfg: &QcloConfig) -> Option<f64> {
    let q = cfg.normalize(question);
    if q.is_empty() {
        return None;
    }
    let c = cfg.normalize(context);
    Some(q.intersection(&c).count() as f64 / q.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessRecord {
    pub item_id: String,
    pub qclo: f64,
}

/// Result of scoring many items: defined records plus the ids whose QCLO is
/// undefined.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HardnessReport {
    pub records: Vec<HardnessRecord>,
    pub undefined: Vec<String>,
}

/// Scores `(item_id, question, context)` triples.
pub fn compute_hardness<'a>(items: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>, cfg: &QcloConfig) -> HardnessReport {
    let mut report = HardnessReport::default();
    for (id, question, context) in items {
        match qclo(question, context, cfg) {
            Some(v) => report.records.push(HardnessRecord { item_id: id.to_string(), qclo: v }),
            None => {
                log::warn!("item {id}: no question words survive filtering; excluded from stratification");
                report.undefined.push(id.to_string());
            }
        }
    }
    report
}

/// Number of items in the hardest `fraction` of `n`: `floor(fraction · n)`, at least 1.
pub fn subset_size(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    // the epsilon keeps e.g. 0.29 * 100 from flooring to 28
    (((fraction * n as f64) + 1e-9).floor() as usize).clamp(1, n)
}

/// Items sorted by ascending QCLO, ties by ascending item id.
pub fn rank_by_hardness(records: &[HardnessRecord]) -> Vec<HardnessRecord> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.qclo.total_cmp(&b.qclo).then_with(|| a.item_id.cmp(&b.item_id)));
    sorted
}

/// The hardest `fraction ∈ (0, 1]` of `records`.
pub fn hardest_subset(records: &[HardnessRecord], fraction: f64) -> Result<Vec<HardnessRecord>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let mut sorted = rank_by_hardness(records);
    sorted.truncate(subset_size(records.len(), fraction));
    Ok(sorted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumBoundary {
    pub fraction: f64,
    pub size: usize,
    /// Largest QCLO inside the stratum.
    pub max_qclo: f64,
}

pub fn stratum_boundaries(records: &[HardnessRecord], fractions: &[f64]) -> Result<Vec<StratumBoundary>> {
    fractions
        .iter()
        .map(|&f| {
            let subset = hardest_subset(records, f)?;
            Ok(StratumBoundary {
                fraction: f,
                size: subset.len(),
                max_qclo: subset.last().map_or(0.0, |r| r.qclo),
            })
        })
        .collect()
}
