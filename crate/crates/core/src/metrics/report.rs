//! Scoring predictions against gold spans and summarizing by stratum.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::qa::{score_against, ROUGE_TOKENIZER};
use super::stats::{bootstrap_ci, BootstrapConfig, ConfidenceInterval};
use crate::error::{Error, Result};

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub item_id: String,
    /// Empty when the model abstained.
    pub span_text: String,
    #[serde(default)]
    pub start_idx: Option<i64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub parse_failed: bool,
}

impl Prediction {
    pub fn abstain(item_id: impl Into<String>) -> Self {
        Self { item_id: item_id.into(), span_text: String::new(), start_idx: None, parse_failed: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub text: String,
    #[serde(default)]
    pub start: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub item_id: String,
    pub question: String,
    pub context_doc_id: String,
    pub answers: Vec<GoldAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub item_id: String,
    pub rouge2: f64,
    pub f1: f64,
    pub em: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumAggregate {
    pub stratum: String,
    pub n: usize,
    pub rouge2: ConfidenceInterval,
    pub f1: ConfidenceInterval,
    pub em: ConfidenceInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tokenizer: String,
    pub bootstrap: BootstrapConfig,
    pub items: Vec<ItemScore>,
    pub aggregates: Vec<StratumAggregate>,
    /// Gold items with no prediction, scored as abstentions.
    pub missing_predictions: Vec<String>,
}

/// Scores each gold item against its prediction (best over references).
pub fn score_items(gold: &[GoldItem], predictions: &[Prediction]) -> Result<(Vec<ItemScore>, Vec<String>)> {
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(&p.item_id, p).is_some() {
            return Err(Error::InvalidInput(format!("duplicate prediction for item {}", p.item_id)));
        }
    }
    let mut seen = BTreeSet::new();
    for g in gold {
        if g.answers.is_empty() {
            return Err(Error::InvalidInput(format!("gold item {} has no answers", g.item_id)));
        }
        if !seen.insert(g.item_id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate gold item {}", g.item_id)));
        }
    }
    let extra = by_id.keys().filter(|k| !seen.contains(*k)).count();
    if extra > 0 {
        log::warn!("{extra} predictions have no gold item and are ignored");
    }
    let missing: Vec<String> = gold.iter().filter(|g| !by_id.contains_key(g.item_id.as_str())).map(|g| g.item_id.clone()).collect();
    if !missing.is_empty() {
        log::warn!("{} gold items have no prediction; scored as abstentions", missing.len());
    }
    let items = gold
        .par_iter()
        .map(|g| {
            let pred = by_id.get(g.item_id.as_str()).map_or("", |p| p.span_text.as_str());
            let refs: Vec<&str> = g.answers.iter().map(|a| a.text.as_str()).collect();
            let s = score_against(pred, &refs);
            ItemScore { item_id: g.item_id.clone(), rouge2: s.rouge2, f1: s.f1, em: s.em }
        })
        .collect();
    Ok((items, missing))
}

fn aggregate(name: &str, items: &[&ItemScore], cfg: &BootstrapConfig) -> Result<StratumAggregate> {
    let ci = |f: fn(&ItemScore) -> f64| bootstrap_ci(&items.iter().map(|i| f(i)).collect::<Vec<_>>(), cfg);
    Ok(StratumAggregate {
        stratum: name.to_string(),
        n: items.len(),
        rouge2: ci(|i| i.rouge2)?,
        f1: ci(|i| i.f1)?,
        em: ci(|i| i.em)?,
    })
}

/// Builds a report with an `all` stratum plus one per named item set.
/// Empty strata are skipped with a warning.
pub fn evaluate(
    gold: &[GoldItem],
    predictions: &[Prediction],
    strata: &BTreeMap<String, BTreeSet<String>>,
    cfg: &BootstrapConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if gold.is_empty() {
        return Err(Error::InvalidInput("no gold items to evaluate".into()));
    }
    let (items, missing_predictions) = score_items(gold, predictions)?;
    let mut aggregates = vec![aggregate("all", &items.iter().collect::<Vec<_>>(), cfg)?];
    for (name, ids) in strata {
        let members: Vec<&ItemScore> = items.iter().filter(|i| ids.contains(&i.item_id)).collect();
        if members.is_empty() {
            log::warn!("stratum {name} has no scored items; skipped");
            continue;
        }
        aggregates.push(aggregate(name, &members, cfg)?);
    }
    Ok(EvalReport { tokenizer: ROUGE_TOKENIZER.to_string(), bootstrap: cfg.clone(), items, aggregates, missing_predictions })
}

impl EvalReport {
    /// Plain-text table of the aggregates.
    pub fn to_table(&self) -> String {
        let header = ["stratum", "n", "rouge2", "f1", "em"];
        let fmt = |c: &ConfidenceInterval| format!("{:.4} [{:.4}, {:.4}]", c.mean, c.low, c.high);
        let rows: Vec<[String; 5]> = self
            .aggregates
            .iter()
            .map(|a| [a.stratum.clone(), a.n.to_string(), fmt(&a.rouge2), fmt(&a.f1), fmt(&a.em)])
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[&str]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        };
        line(&header);
        for row in &rows {
            line(&row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }
}
