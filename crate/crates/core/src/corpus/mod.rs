//! Labeled document corpora: loading, validation and sentence segmentation.
//!
//! All offsets are counted in Unicode scalar values.

mod segment;

pub use segment::{
    segment, SegmenterConfig, SegmenterMode, SentenceSpan, DEFAULT_ABBREVIATIONS,
    DEFAULT_CLOSING_TOKENS, EXTENDED_BREAK_TOKENS,
};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// A document with its sentence segmentation.
#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub sentences: Vec<SentenceSpan>,
    // byte offset of every char, plus text.len()
    char_bytes: Vec<usize>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, cfg: &SegmenterConfig) -> Self {
        let text = text.into();
        let sentences = segment(&text, cfg);
        let char_bytes = text
            .char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(text.len()))
            .collect();
        Self {
            doc_id: doc_id.into(),
            text,
            sentences,
            char_bytes,
        }
    }

    /// Length of the text in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.char_bytes.len() - 1
    }

    /// Byte offset of character `idx`; `idx == char_len()` maps to `text.len()`.
    pub(crate) fn byte_offset(&self, idx: usize) -> usize {
        self.char_bytes[idx]
    }

    /// Text at character offsets `[start, end)`, or `None` when out of range.
    pub fn slice(&self, start: usize, end: usize) -> Option<&str> {
        if start > end || end > self.char_len() {
            return None;
        }
        Some(&self.text[self.char_bytes[start]..self.char_bytes[end]])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub code: String,
    pub description: String,
}

/// Ordered label codes with their human-readable descriptions.
#[derive(Debug, Clone, Default)]
pub struct LabelVocabulary {
    entries: Vec<Label>,
    index: HashMap<String, usize>,
}

impl LabelVocabulary {
    pub fn new(entries: Vec<Label>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.description.trim().is_empty() {
                return Err(Error::InvalidInput(format!("label {:?} has an empty description", e.code)));
            }
            if index.insert(e.code.clone(), i).is_some() {
                return Err(Error::DuplicateCode(e.code.clone()));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[Label] {
        &self.entries
    }

    pub fn codes(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.code.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn description(&self, code: &str) -> Option<&str> {
        self.position(code).map(|i| self.entries[i].description.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub doc_id: String,
    pub positive_codes: BTreeSet<String>,
}

impl LabelAssignment {
    pub fn has_label(&self, code: &str) -> bool {
        self.positive_codes.contains(code)
    }
}

/// Documents, vocabulary and assignments, index-aligned: `assignments[i]`
/// belongs to `documents[i]`.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocabulary: LabelVocabulary,
    pub assignments: Vec<LabelAssignment>,
}

impl Corpus {
    /// Builds a corpus from raw parts, enforcing unique ids and known codes.
    pub fn new(
        documents: Vec<Document>,
        vocabulary: LabelVocabulary,
        assignments: Vec<LabelAssignment>,
    ) -> Result<Self> {
        if documents.len() != assignments.len() {
            return Err(Error::InvalidInput(format!(
                "{} documents but {} assignments",
                documents.len(),
                assignments.len()
            )));
        }
        let mut seen = HashSet::new();
        for (doc, a) in documents.iter().zip(&assignments) {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::DuplicateDocId(doc.doc_id.clone()));
            }
            if doc.doc_id != a.doc_id {
                return Err(Error::InvalidInput(format!(
                    "assignment for {:?} is aligned with document {:?}",
                    a.doc_id, doc.doc_id
                )));
            }
            if let Some(code) = a.positive_codes.iter().find(|c| vocabulary.position(c).is_none()) {
                return Err(Error::UnknownCode {
                    doc_id: a.doc_id.clone(),
                    code: code.clone(),
                });
            }
        }
        Ok(Self {
            documents,
            vocabulary,
            assignments,
        })
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Map from doc_id to position in `documents`.
    pub fn doc_index(&self) -> HashMap<&str, usize> {
        self.documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.as_str(), i))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub codes: Vec<String>,
}

/// Reads a vocabulary JSON-lines file of `{"code", "description"}` records.
pub fn load_vocabulary(path: &Path) -> Result<LabelVocabulary> {
    LabelVocabulary::new(jsonl::read(path)?)
}

/// Loads and segments (default mode) a corpus and its label vocabulary.
pub fn load_corpus(path: &Path, vocab_path: &Path) -> Result<Corpus> {
    let vocabulary = load_vocabulary(vocab_path)?;
    let records: Vec<CorpusRecord> = jsonl::read(path)?;
    let cfg = SegmenterConfig::default();
    let (documents, assignments) = records
        .into_iter()
        .map(|r| {
            let a = LabelAssignment {
                doc_id: r.doc_id.clone(),
                positive_codes: r.codes.into_iter().collect(),
            };
            (Document::new(r.doc_id, r.text, &cfg), a)
        })
        .unzip();
    Corpus::new(documents, vocabulary, assignments)
}
