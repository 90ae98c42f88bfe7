//! Shared word tokenizer.
//!
//! Every lexical component (TF-IDF features, the builtin embedder, QCLO and the
//! QA metrics) tokenizes the same way: lowercase, then split on runs of
//! non-alphanumeric characters.

/// Lowercased alphanumeric runs of `text`, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Number of Unicode scalar values in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring of `s` addressed by Unicode scalar offsets `[start, end)`.
///
/// Offsets past the end are clamped.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let mut it = s.char_indices().map(|(b, _)| b).chain(std::iter::once(s.len()));
    let b0 = it.by_ref().nth(start).unwrap_or(s.len());
    let b1 = if end > start {
        it.nth(end - start - 1).unwrap_or(s.len())
    } else {
        b0
    };
    &s[b0..b1]
}
