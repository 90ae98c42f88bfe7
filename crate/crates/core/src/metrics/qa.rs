//! Extractive-QA span metrics.

use std::collections::HashMap;

use crate::text::tokenize;

/// Identifies the ROUGE tokenizer in report metadata.
pub const ROUGE_TOKENIZER: &str = "lowercase-alnum-v1";

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Answer normalization shared by exact match and token F1: lowercase,
/// delete punctuation, drop English articles, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let stripped: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped.split_whitespace().filter(|w| !ARTICLES.contains(w)).collect::<Vec<_>>().join(" ")
}

fn counts<T: std::hash::Hash + Eq>(items: impl IntoIterator<Item = T>) -> HashMap<T, usize> {
    let mut map = HashMap::new();
    for item in items {
        *map.entry(item).or_insert(0) += 1;
    }
    map
}

/// Size of the multiset intersection.
fn overlap<T: std::hash::Hash + Eq>(pred: &HashMap<T, usize>, reference: &HashMap<T, usize>) -> usize {
    reference.iter().map(|(k, &n)| n.min(pred.get(k).copied().unwrap_or(0))).sum()
}

/// Bigram recall of `prediction` against `reference` with clipped counts.
/// References shorter than two tokens fall back to unigram recall.
pub fn rouge2_recall(prediction: &str, reference: &str) -> f64 {
    let pred = tokenize(prediction);
    let refs = tokenize(reference);
    if refs.len() < 2 {
        if refs.is_empty() {
            return if pred.is_empty() { 1.0 } else { 0.0 };
        }
        let hit = overlap(&counts(pred.iter()), &counts(refs.iter()));
        return hit as f64 / refs.len() as f64;
    }
    let bigrams = |t: &[String]| counts(t.windows(2).map(|w| (w[0].clone(), w[1].clone())));
    let ref_bigrams = bigrams(&refs);
    let hit = overlap(&bigrams(&pred), &ref_bigrams);
    hit as f64 / (refs.len() - 1) as f64
}

/// Token-level F1 over normalized answers.
pub fn token_f1(prediction: &str, reference: &str) -> f64 {
    let p = normalize_answer(prediction);
    let r = normalize_answer(reference);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let rt: Vec<&str> = r.split_whitespace().collect();
    if pt.is_empty() || rt.is_empty() {
        return if pt.is_empty() && rt.is_empty() { 1.0 } else { 0.0 };
    }
    let common = overlap(&counts(pt.iter()), &counts(rt.iter()));
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pt.len() as f64;
    let recall = common as f64 / rt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn exact_match(prediction: &str, reference: &str) -> f64 {
    if normalize_answer(prediction) == normalize_answer(reference) { 1.0 } else { 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpanScores {
    pub rouge2: f64,
    pub f1: f64,
    pub em: f64,
}

/// Scores against every reference and keeps the best value per metric.
pub fn score_against(prediction: &str, references: &[&str]) -> SpanScores {
    let mut best = SpanScores { rouge2: 0.0, f1: 0.0, em: 0.0 };
    for r in references {
        best.rouge2 = best.rouge2.max(rouge2_recall(prediction, r));
        best.f1 = best.f1.max(token_f1(prediction, r));
        best.em = best.em.max(exact_match(prediction, r));
    }
    best
}
