//! Combination of two expert annotators' judgements per QA pair.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub pair_id: String,
    pub annotator_id: String,
    pub correct: bool,
    #[serde(default)]
    pub lexical: bool,
    #[serde(default)]
    pub abbreviation: bool,
    #[serde(default)]
    pub negation: bool,
}

impl AnnotationRecord {
    /// Lexical, abbreviation and negation are only marked on correct answers.
    pub fn validate(&self) -> Result<()> {
        if !self.correct && (self.lexical || self.abbreviation || self.negation) {
            return Err(Error::InvalidInput(format!(
                "pair {} annotator {}: lexical/abbreviation/negation marked on an incorrect answer",
                self.pair_id, self.annotator_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedAnnotation {
    pub pair_id: String,
    /// Correct according to at least one annotator.
    pub correct: bool,
    pub semantic: bool,
    pub lexical: bool,
    pub abbreviation: bool,
    pub negation: bool,
}

/// Merges exactly two annotators per pair. Lexical, abbreviation and negation
/// are OR-ed; a semantic match is correct for someone and marked lexical or
/// abbreviation by no one.
pub fn combine_annotations(records: &[AnnotationRecord]) -> Result<Vec<CombinedAnnotation>> {
    let mut by_pair: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        r.validate()?;
        by_pair.entry(&r.pair_id).or_default().push(r);
    }
    by_pair
        .into_iter()
        .map(|(pair_id, rs)| {
            if rs.len() != 2 || rs[0].annotator_id == rs[1].annotator_id {
                return Err(Error::InvalidInput(format!(
                    "pair {pair_id}: expected two distinct annotators, found {} records",
                    rs.len()
                )));
            }
            let any = |f: fn(&AnnotationRecord) -> bool| rs.iter().any(|r| f(r));
            let correct = any(|r| r.correct);
            let lexical = any(|r| r.lexical);
            let abbreviation = any(|r| r.abbreviation);
            Ok(CombinedAnnotation {
                pair_id: pair_id.to_string(),
                correct,
                semantic: correct && !lexical && !abbreviation,
                lexical,
                abbreviation,
                negation: any(|r| r.negation),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCounts {
    pub pairs: usize,
    pub correct: usize,
    pub semantic: usize,
    pub lexical: usize,
    pub abbreviation: usize,
    pub negation: usize,
}

/// Tallies combined annotations per generation method. Pairs without a
/// method entry are counted under `"unknown"`.
pub fn counts_by_method(
    combined: &[CombinedAnnotation],
    pair_methods: &BTreeMap<String, String>,
) -> BTreeMap<String, MethodCounts> {
    let mut out: BTreeMap<String, MethodCounts> = BTreeMap::new();
    for c in combined {
        let method = pair_methods.get(&c.pair_id).map_or("unknown", String::as_str);
        let e = out.entry(method.to_string()).or_default();
        e.pairs += 1;
        e.correct += c.correct as usize;
        e.semantic += c.semantic as usize;
        e.lexical += c.lexical as usize;
        e.abbreviation += c.abbreviation as usize;
        e.negation += c.negation as usize;
    }
    out
}
