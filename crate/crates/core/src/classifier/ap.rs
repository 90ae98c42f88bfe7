use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Scorer;
use crate::corpus::Corpus;
use crate::error::Result;

/// Average precision of a ranking: `Σ (R_n − R_{n−1}) · P_n` over the items
/// sorted by descending score, ties broken by ascending id.
///
/// Returns `None` when there are no positives.
pub fn average_precision(scores: &[f64], positives: &[bool], ids: &[&str]) -> Option<f64> {
    assert!(scores.len() == positives.len() && scores.len() == ids.len(), "length mismatch");
    let n_pos = positives.iter().filter(|p| **p).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| desc(scores[a], scores[b]).then_with(|| ids[a].cmp(ids[b])));
    Some(ap_of_order(&order, positives, n_pos))
}

fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

fn ap_of_order(order: &[usize], positives: &[bool], n_pos: usize) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positives[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    sum / n_pos as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub micro_ap: f64,
    /// Unweighted mean over labels with at least one positive.
    pub macro_ap: f64,
    pub per_label_ap: BTreeMap<String, f64>,
    /// Labels without positives, for which AP is undefined.
    pub undefined_labels: Vec<String>,
}

/// Scores every document of `corpus` and computes micro/macro AP.
pub fn evaluate(scorer: &dyn Scorer, corpus: &Corpus) -> Result<ClassifierMetrics> {
    let texts: Vec<String> = corpus.documents.iter().map(|d| d.text.clone()).collect();
    let scores = scorer.score(&texts)?;
    let ids: Vec<&str> = corpus.documents.iter().map(|d| d.doc_id.as_str()).collect();

    let mut per_label_ap = BTreeMap::new();
    let mut undefined_labels = Vec::new();
    // micro: (score, doc position, label column, positive)
    let mut flat: Vec<(f64, usize, usize, bool)> = Vec::new();
    for (col, code) in scorer.labels().iter().enumerate() {
        let col_scores: Vec<f64> = (0..scores.n_rows()).map(|r| scores.get(r, col)).collect();
        let pos: Vec<bool> = corpus.assignments.iter().map(|a| a.has_label(code)).collect();
        flat.extend(col_scores.iter().zip(&pos).enumerate().map(|(r, (&s, &p))| (s, r, col, p)));
        match average_precision(&col_scores, &pos, &ids) {
            Some(ap) => {
                per_label_ap.insert(code.clone(), ap);
            }
            None => undefined_labels.push(code.clone()),
        }
    }
    flat.sort_by(|a, b| desc(a.0, b.0).then_with(|| ids[a.1].cmp(ids[b.1])).then(a.2.cmp(&b.2)));
    let positives: Vec<bool> = flat.iter().map(|f| f.3).collect();
    let n_pos = positives.iter().filter(|p| **p).count();
    let order: Vec<usize> = (0..flat.len()).collect();
    let micro_ap = if n_pos == 0 { 0.0 } else { ap_of_order(&order, &positives, n_pos) };
    let macro_ap = if per_label_ap.is_empty() {
        0.0
    } else {
        per_label_ap.values().sum::<f64>() / per_label_ap.len() as f64
    };
    Ok(ClassifierMetrics {
        micro_ap,
        macro_ap,
        per_label_ap,
        undefined_labels,
    })
}
