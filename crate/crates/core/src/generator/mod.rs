//! Synthetic QA pair generation.
//!
//! Every generator emits one pair per (document, positive label): the question
//! is the label description rendered into a template and the answer is one
//! sentence of the document, chosen by explainer importance ([`generate_xaiqa`]),
//! by embedding similarity ([`generate_cosine`]) or uniformly at random
//! ([`generate_random`]). [`postprocess`] then narrows answers to the
//! list item or clause most similar to the question.

mod postprocess;
mod select;

pub use postprocess::postprocess;
pub use select::{mix, select_top_r, DEFAULT_TOP_R};

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, SentenceSpan};
use crate::embedder::{cosine, Embedder};
use crate::error::{Error, Result};
use crate::explainer::ImportanceMatrix;

pub const DEFAULT_TEMPLATE: &str = "Does the patient have {X} in their medical history?";
pub const TEMPLATE_PLACEHOLDER: &str = "{X}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Xaiqa,
    XaiqaPp,
    Cosine,
    Random,
    /// Pairs from an existing (non-synthetic) dataset, used as the base in [`mix`].
    Base,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Xaiqa => "xaiqa",
            Method::XaiqaPp => "xaiqa_pp",
            Method::Cosine => "cosine",
            Method::Random => "random",
            Method::Base => "base",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// An answer as an exact substring of its document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl From<&SentenceSpan> for AnswerSpan {
    fn from(s: &SentenceSpan) -> Self {
        Self {
            start: s.start,
            end: s.end,
            text: s.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PairRecord", into = "PairRecord")]
pub struct QAPair {
    pub question: String,
    pub answer: AnswerSpan,
    pub doc_id: String,
    pub label_code: String,
    pub method: Method,
    pub score: f64,
    pub run_id: String,
}

/// Flat on-disk form of a [`QAPair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub question: String,
    pub answer_text: String,
    pub answer_start: usize,
    pub answer_end: usize,
    pub doc_id: String,
    pub label_code: String,
    pub method: Method,
    pub score: f64,
    pub run_id: String,
}

impl From<PairRecord> for QAPair {
    fn from(r: PairRecord) -> Self {
        Self {
            question: r.question,
            answer: AnswerSpan {
                start: r.answer_start,
                end: r.answer_end,
                text: r.answer_text,
            },
            doc_id: r.doc_id,
            label_code: r.label_code,
            method: r.method,
            score: r.score,
            run_id: r.run_id,
        }
    }
}

impl From<QAPair> for PairRecord {
    fn from(p: QAPair) -> Self {
        Self {
            question: p.question,
            answer_text: p.answer.text,
            answer_start: p.answer.start,
            answer_end: p.answer.end,
            doc_id: p.doc_id,
            label_code: p.label_code,
            method: p.method,
            score: p.score,
            run_id: p.run_id,
        }
    }
}

/// Settings and identity of one generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub run_id: String,
    pub method: Method,
    /// Echo of every setting that influenced the run.
    pub config: serde_json::Value,
}

impl GenerationRun {
    /// The run id is a hash of the method and configuration, so identical
    /// runs share an id.
    pub fn new(method: Method, config: serde_json::Value) -> Self {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in method.as_str().bytes().chain(config.to_string().into_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        Self {
            run_id: format!("{}-{h:016x}", method.as_str()),
            method,
            config,
        }
    }
}

/// Renders `template` with `{X}` replaced by `description`.
pub fn render_question(template: &str, description: &str) -> Result<String> {
    if !template.contains(TEMPLATE_PLACEHOLDER) {
        return Err(Error::InvalidConfig(format!("question template {template:?} lacks {TEMPLATE_PLACEHOLDER}")));
    }
    Ok(template.replace(TEMPLATE_PLACEHOLDER, description))
}

/// Index of the largest value; ties go to the lowest index. NaN never wins.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b].partial_cmp(&v) != Some(Ordering::Less) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// (document, [(label code, question)]) for every document with a positive label.
fn positive_items<'c>(corpus: &'c Corpus, template: &str) -> Result<Vec<(&'c Document, Vec<(&'c str, String)>)>> {
    let mut questions: HashMap<&str, String> = HashMap::new();
    for label in corpus.vocabulary.entries() {
        questions.insert(&label.code, render_question(template, &label.description)?);
    }
    let mut out = Vec::new();
    for (doc, a) in corpus.documents.iter().zip(&corpus.assignments) {
        let labels: Vec<(&str, String)> = corpus
            .vocabulary
            .entries()
            .iter()
            .filter(|l| a.has_label(&l.code))
            .map(|l| (l.code.as_str(), questions[l.code.as_str()].clone()))
            .collect();
        if labels.is_empty() {
            continue;
        }
        if doc.sentences.is_empty() {
            log::warn!("document {} has positive labels but no sentences; skipped", doc.doc_id);
            continue;
        }
        out.push((doc, labels));
    }
    Ok(out)
}

/// Explainer-driven pairs: the answer for label `j` is the sentence with the
/// highest importance in column `j`, and the score is that importance.
pub fn generate_xaiqa(corpus: &Corpus, importance: &[ImportanceMatrix], template: &str, run_id: &str) -> Result<Vec<QAPair>> {
    let by_doc: HashMap<&str, &ImportanceMatrix> = importance.iter().map(|m| (m.doc_id.as_str(), m)).collect();
    let mut pairs = Vec::new();
    for (doc, labels) in positive_items(corpus, template)? {
        let matrix = by_doc
            .get(doc.doc_id.as_str())
            .ok_or_else(|| Error::MissingImportance(doc.doc_id.clone()))?;
        if matrix.n_sentences() != doc.sentences.len() {
            return Err(Error::InvalidInput(format!(
                "importance matrix for {:?} has {} rows but the document has {} sentences",
                doc.doc_id,
                matrix.n_sentences(),
                doc.sentences.len()
            )));
        }
        for (code, question) in labels {
            let column = matrix.column(code).ok_or_else(|| {
                Error::InvalidInput(format!("importance matrix for {:?} has no column for {code:?}", doc.doc_id))
            })?;
            let idx = argmax_first(&column).ok_or_else(|| Error::InvalidInput(format!("no finite importance for {:?}", doc.doc_id)))?;
            pairs.push(QAPair {
                question,
                answer: (&doc.sentences[idx]).into(),
                doc_id: doc.doc_id.clone(),
                label_code: code.to_string(),
                method: Method::Xaiqa,
                score: column[idx],
                run_id: run_id.to_string(),
            });
        }
    }
    Ok(pairs)
}

/// Similarity baseline: the answer is the sentence whose embedding is most
/// cosine-similar to the label description's, and the score is that cosine.
pub fn generate_cosine(corpus: &Corpus, embedder: &dyn Embedder, template: &str, run_id: &str) -> Result<Vec<QAPair>> {
    let entries = corpus.vocabulary.entries();
    let descriptions: Vec<String> = entries.iter().map(|l| l.description.clone()).collect();
    let desc_vecs = embedder.embed(&descriptions)?;
    let desc_by_code: HashMap<&str, usize> = entries.iter().enumerate().map(|(i, l)| (l.code.as_str(), i)).collect();

    let items = positive_items(corpus, template)?;
    let per_doc: Vec<Vec<QAPair>> = items
        .par_iter()
        .map(|(doc, labels)| {
            let sentences: Vec<String> = doc.sentences.iter().map(|s| s.text.clone()).collect();
            let sent_vecs = embedder.embed(&sentences)?;
            labels
                .iter()
                .map(|(code, question)| {
                    let q = &desc_vecs[desc_by_code[code]];
                    let sims = sent_vecs.iter().map(|s| cosine(q, s)).collect::<Result<Vec<f64>>>()?;
                    let idx = argmax_first(&sims).unwrap_or(0);
                    Ok(QAPair {
                        question: question.clone(),
                        answer: (&doc.sentences[idx]).into(),
                        doc_id: doc.doc_id.clone(),
                        label_code: code.to_string(),
                        method: Method::Cosine,
                        score: sims[idx],
                        run_id: run_id.to_string(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_doc.into_iter().flatten().collect())
}

/// Random baseline: a uniformly chosen sentence per (document, label), score 0.
pub fn generate_random(corpus: &Corpus, seed: u64, template: &str, run_id: &str) -> Result<Vec<QAPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for (doc, labels) in positive_items(corpus, template)? {
        for (code, question) in labels {
            let idx = rng.random_range(0..doc.sentences.len());
            pairs.push(QAPair {
                question,
                answer: (&doc.sentences[idx]).into(),
                doc_id: doc.doc_id.clone(),
                label_code: code.to_string(),
                method: Method::Random,
                score: 0.0,
                run_id: run_id.to_string(),
            });
        }
    }
    Ok(pairs)
}
