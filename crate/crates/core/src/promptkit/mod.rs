//! Zero-shot and few-shot extractive-QA prompts.
//!
//! Prompts are assembled from fixed templates, optional in-context examples
//! cut from the synthetic pairs, and the query document. Nothing here calls a
//! model: prompts are written to disk and responses are read back.

use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::generator::{AnswerSpan, QAPair};
use crate::metrics::Prediction;
use crate::text::char_len;

pub const ZERO_SHOT_TEMPLATE: &str = include_str!("zero_shot.txt");
pub const FEW_SHOT_TEMPLATE: &str = include_str!("few_shot.txt");
pub const FEW_SHOT_SUFFIX: &str = include_str!("few_shot_suffix.txt");

pub const DEFAULT_WINDOW_RADIUS: usize = 100;
pub const DEFAULT_NUM_EXAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    Chars,
    ApproxTokens,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptBudget {
    pub max_units: usize,
    pub unit: BudgetUnit,
    pub chars_per_token: f64,
}

impl Default for PromptBudget {
    /// An 8k-token context at four characters per token.
    fn default() -> Self {
        Self { max_units: 8192, unit: BudgetUnit::ApproxTokens, chars_per_token: 4.0 }
    }
}

impl PromptBudget {
    /// Size of `text` in budget units.
    pub fn count(&self, text: &str) -> usize {
        let chars = char_len(text);
        match self.unit {
            BudgetUnit::Chars => chars,
            BudgetUnit::ApproxTokens => (chars as f64 / self.chars_per_token).ceil() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.chars_per_token > 0.0 && self.chars_per_token.is_finite()) {
            problems.push(format!("chars_per_token must be positive, got {}", self.chars_per_token));
        } else if self.max_units <= self.count(ZERO_SHOT_TEMPLATE) {
            problems.push(format!(
                "max_units {} does not exceed the template length {}",
                self.max_units,
                self.count(ZERO_SHOT_TEMPLATE)
            ));
        }
        if problems.is_empty() { Ok(()) } else { Err(Error::InvalidConfig(problems.join("; "))) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub example_id: String,
    pub question: String,
    pub answer_text: String,
    /// Character offset of the answer inside `context_window`.
    pub answer_start: usize,
    pub context_window: String,
    pub window_radius: usize,
}

/// Document text around `span`, `radius` characters to each side, clipped
/// at the document boundaries.
pub fn build_context_window(doc: &Document, span: &AnswerSpan, radius: usize) -> Result<String> {
    let len = doc.char_len();
    if doc.slice(span.start, span.end) != Some(span.text.as_str()) {
        return Err(Error::CorpusDrift { doc_id: doc.doc_id.clone(), start: span.start, end: span.end });
    }
    let lo = span.start.saturating_sub(radius);
    let hi = span.end.saturating_add(radius).min(len);
    Ok(doc.slice(lo, hi).unwrap_or_default().to_string())
}

/// Draws up to `k` pairs uniformly (seeded) and turns them into examples.
/// The draw keeps the order of `ranked`, so the lowest-ranked example is last.
pub fn sample_examples(ranked: &[QAPair], corpus: &Corpus, k: usize, radius: usize, seed: u64) -> Result<Vec<FewShotExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, ranked.len(), k.min(ranked.len())).into_vec();
    picks.sort_unstable();
    picks
        .into_iter()
        .map(|i| {
            let pair = &ranked[i];
            let doc = corpus
                .document(&pair.doc_id)
                .ok_or_else(|| Error::UnknownDocument(pair.doc_id.clone()))?;
            let context_window = build_context_window(doc, &pair.answer, radius)?;
            Ok(FewShotExample {
                example_id: format!("{}:{}", pair.doc_id, pair.label_code),
                question: pair.question.clone(),
                answer_text: pair.answer.text.clone(),
                answer_start: pair.answer.start - pair.answer.start.saturating_sub(radius),
                context_window,
                window_radius: radius,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct AnswerJson<'a> {
    start_idx: usize,
    span_text: &'a str,
}

fn example_block(ex: &FewShotExample) -> String {
    let answer = serde_json::to_string(&AnswerJson { start_idx: ex.answer_start, span_text: &ex.answer_text })
        .expect("plain struct serializes");
    format!("\nQuestion: \"{}\"\nDocument: \"{}\"\n{}\n", ex.question, ex.context_window, answer)
}

fn query_block(question: &str, document: &str) -> String {
    format!("\nQuestion: \"{question}\"\nDocument: \"{document}\"\n")
}

/// Full prompt text for a given example list.
pub fn render_prompt(examples: &[FewShotExample], question: &str, document: &str) -> String {
    if examples.is_empty() {
        return format!("{ZERO_SHOT_TEMPLATE}{}", query_block(question, document));
    }
    let mut out = String::from(FEW_SHOT_TEMPLATE);
    for ex in examples {
        out.push_str(&example_block(ex));
    }
    out.push('\n');
    out.push_str(FEW_SHOT_SUFFIX);
    out.push('\n');
    out.push_str(&query_block(question, document));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptManifest {
    pub query_id: String,
    pub retained_examples: Vec<String>,
    pub unit_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledPrompt {
    pub prompt: String,
    pub manifest: PromptManifest,
}

/// Assembles a prompt within `budget`, dropping examples from the end one at
/// a time. Errors when even the zero-shot prompt does not fit.
pub fn assemble_prompt(
    query_id: &str,
    examples: &[FewShotExample],
    question: &str,
    document: &str,
    budget: &PromptBudget,
) -> Result<AssembledPrompt> {
    budget.validate()?;
    assemble_prompt_with(query_id, examples, question, document, budget.max_units, &|s| budget.count(s))
}

/// [`assemble_prompt`] with a caller-supplied unit counter, e.g. a real tokenizer.
pub fn assemble_prompt_with(
    query_id: &str,
    examples: &[FewShotExample],
    question: &str,
    document: &str,
    max_units: usize,
    count: &dyn Fn(&str) -> usize,
) -> Result<AssembledPrompt> {
    let mut kept = examples.len();
    loop {
        let prompt = render_prompt(&examples[..kept], question, document);
        let units = count(&prompt);
        if units <= max_units {
            if kept < examples.len() {
                log::info!("query {query_id}: dropped {} examples to fit the budget", examples.len() - kept);
            }
            let manifest = PromptManifest {
                query_id: query_id.to_string(),
                retained_examples: examples[..kept].iter().map(|e| e.example_id.clone()).collect(),
                unit_count: units,
            };
            return Ok(AssembledPrompt { prompt, manifest });
        }
        if kept == 0 {
            return Err(Error::QueryExceedsBudget { needed: units, budget: max_units });
        }
        kept -= 1;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseOptions {
    /// Also try closing an unterminated object with `}`.
    pub recover_unclosed: bool,
}

fn answer_from(value: &serde_json::Value) -> Option<(String, Option<i64>)> {
    let obj = value.as_object()?;
    let span = obj.get("span_text")?.as_str()?.to_string();
    let start = obj.get("start_idx").and_then(|v| v.as_i64().or_else(|| v.as_f64().map(|f| f as i64)));
    Some((span, start))
}

fn first_object(raw: &str, recover: bool) -> Option<(String, Option<i64>)> {
    let starts: Vec<usize> = raw.match_indices('{').map(|(i, _)| i).collect();
    for &i in &starts {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<serde_json::Value>();
        if let Some(Ok(v)) = stream.next() {
            if let Some(found) = answer_from(&v) {
                return Some(found);
            }
        }
    }
    if recover {
        for &i in &starts {
            let patched = format!("{}}}", raw[i..].trim_end());
            if let Ok(v) = serde_json::from_str::<serde_json::Value>(&patched) {
                if let Some(found) = answer_from(&v) {
                    return Some(found);
                }
            }
        }
    }
    None
}

/// Extracts the answer from a raw model response: the first JSON object
/// carrying a string `span_text`, wherever it appears in the text. Anything
/// unparsable becomes an abstention flagged as a parse failure.
pub fn parse_model_answer(item_id: &str, raw: &str, opts: ParseOptions) -> Prediction {
    match first_object(raw, opts.recover_unclosed) {
        Some((span_text, start_idx)) => {
            Prediction { item_id: item_id.to_string(), span_text, start_idx, parse_failed: false }
        }
        None => Prediction { parse_failed: true, ..Prediction::abstain(item_id) },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub query_id: String,
    pub raw: String,
}

/// Writes `{query_id}.prompt.txt` files and `manifest.json` into `dir`.
pub fn write_prompt_bundle(dir: &Path, prompts: &[AssembledPrompt]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for p in prompts {
        let path = dir.join(format!("{}.prompt.txt", p.manifest.query_id));
        std::fs::write(&path, &p.prompt).map_err(|e| Error::io(&path, e))?;
    }
    let manifest: Vec<&PromptManifest> = prompts.iter().map(|p| &p.manifest).collect();
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>> {
    crate::jsonl::read(path)
}
