//! Deterministic rule-based sentence segmentation over character offsets.
//!
//! Text is scanned as whitespace-delimited words. A sentence closes after a
//! word ending in a closing token (unless the word is a listed abbreviation).
//! In extended mode, list markers (`•`, `-`, `1)` ...) additionally open a new
//! segment before the word that carries them, so `1) aspirin 2) statin`
//! yields one segment per list item.

use serde::{Deserialize, Serialize};

/// Closing tokens used in both modes.
pub const DEFAULT_CLOSING_TOKENS: [&str; 3] = [".", "?", "!"];

/// Full extended-mode break-token list, in the order the post-processing
/// tokenizer was initialised with.
pub const EXTENDED_BREAK_TOKENS: [&str; 16] = [
    ".", "?", "!", "•", "-", ";", "0)", "1)", "2)", "3)", "4)", "5)", "6)", "7)", "8)", "9)",
];

pub const DEFAULT_ABBREVIATIONS: [&str; 6] = ["Dr.", "Mr.", "Mrs.", "vs.", "e.g.", "i.e."];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmenterMode {
    #[default]
    Default,
    Extended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub mode: SegmenterMode,
    /// Additional closing tokens on top of the mode's list.
    #[serde(default)]
    pub extra_break_tokens: Vec<String>,
    /// Words that end in `.` but never close a sentence. Compared case-insensitively.
    #[serde(default = "default_abbreviations")]
    pub abbreviations: Vec<String>,
}

fn default_abbreviations() -> Vec<String> {
    DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect()
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            mode: SegmenterMode::Default,
            extra_break_tokens: Vec::new(),
            abbreviations: default_abbreviations(),
        }
    }
}

impl SegmenterConfig {
    pub fn extended() -> Self {
        Self {
            mode: SegmenterMode::Extended,
            ..Self::default()
        }
    }

    /// The break tokens in effect for this configuration.
    pub fn break_tokens(&self) -> Vec<String> {
        let base: &[&str] = match self.mode {
            SegmenterMode::Default => &DEFAULT_CLOSING_TOKENS,
            SegmenterMode::Extended => &EXTENDED_BREAK_TOKENS,
        };
        base.iter()
            .map(|s| s.to_string())
            .chain(self.extra_break_tokens.iter().cloned())
            .collect()
    }

    fn closes(&self, word: &str) -> bool {
        let closing = match self.mode {
            SegmenterMode::Default => DEFAULT_CLOSING_TOKENS.iter().any(|t| word.ends_with(t)),
            SegmenterMode::Extended => {
                DEFAULT_CLOSING_TOKENS.iter().any(|t| word.ends_with(t)) || word.ends_with(';')
            }
        } || self
            .extra_break_tokens
            .iter()
            .any(|t| !t.is_empty() && word.ends_with(t.as_str()));
        closing
            && !self
                .abbreviations
                .iter()
                .any(|a| a.eq_ignore_ascii_case(word))
    }

    fn opens(&self, word: &str) -> bool {
        if self.mode != SegmenterMode::Extended {
            return false;
        }
        if word.starts_with('•') {
            return true;
        }
        if let Some(rest) = word.strip_prefix('-') {
            return rest.chars().next().is_none_or(char::is_alphabetic);
        }
        // `1)`, `12)`, `(3)`: the word ends in one of the digit-paren tokens and
        // everything before it is digits.
        let inner = word.strip_prefix('(').unwrap_or(word);
        match inner.strip_suffix(')') {
            Some(num) => !num.is_empty() && num.chars().all(|c| c.is_ascii_digit()),
            None => false,
        }
    }
}

/// A sentence as a half-open range of Unicode scalar offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Splits `text` into sentence spans. Whitespace-only input yields no spans.
pub fn segment(text: &str, cfg: &SegmenterConfig) -> Vec<SentenceSpan> {
    // (char_start, char_end, byte_start, byte_end) of every whitespace-delimited word.
    let mut words: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut n_chars = 0;
    for (ci, (bi, ch)) in text.char_indices().enumerate() {
        n_chars = ci + 1;
        if ch.is_whitespace() {
            if let Some((cs, bs)) = current.take() {
                words.push((cs, ci, bs, bi));
            }
        } else if current.is_none() {
            current = Some((ci, bi));
        }
    }
    if let Some((cs, bs)) = current {
        words.push((cs, n_chars, bs, text.len()));
    }

    let mut spans = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    let mut last: (usize, usize) = (0, 0);
    let flush = |open: &mut Option<(usize, usize)>, last: (usize, usize), spans: &mut Vec<SentenceSpan>| {
        if let Some((cs, bs)) = open.take() {
            spans.push(SentenceSpan {
                index: spans.len(),
                start: cs,
                end: last.0,
                text: text[bs..last.1].to_string(),
            });
        }
    };
    for &(cs, ce, bs, be) in &words {
        let word = &text[bs..be];
        if open.is_some() && cfg.opens(word) {
            flush(&mut open, last, &mut spans);
        }
        if open.is_none() {
            open = Some((cs, bs));
        }
        last = (ce, be);
        if cfg.closes(word) {
            flush(&mut open, last, &mut spans);
        }
    }
    flush(&mut open, last, &mut spans);
    spans
}
