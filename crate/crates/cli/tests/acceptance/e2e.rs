//! The whole pipeline through the command-line binary, run twice.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::json;
use xaiqa::generator::{render_question, DEFAULT_TEMPLATE};

use crate::fixtures;

const CONFIG: &str = r#"
[paths]
corpus = "data/corpus.jsonl"
vocab = "data/vocab.jsonl"
output_dir = "out"

[explainer]
iterations = 200

[generation]
top_r = 50

[prompt]
num_examples = 3
"#;

fn jsonl(values: impl IntoIterator<Item = serde_json::Value>) -> String {
    values.into_iter().map(|v| format!("{v}\n")).collect()
}

fn write_inputs(dir: &Path) -> Result<(), String> {
    let planted = fixtures::planted_corpus(40, false, 3);
    let corpus = &planted.corpus;
    let data = dir.join("data");
    std::fs::create_dir_all(&data).map_err(|e| e.to_string())?;
    let write = |name: &str, text: String| std::fs::write(data.join(name), text).map_err(|e| e.to_string());

    write("vocab.jsonl", jsonl(corpus.vocabulary.entries().iter().map(|l| json!({"code": l.code, "description": l.description}))))?;
    write(
        "corpus.jsonl",
        jsonl(corpus.documents.iter().zip(&corpus.assignments).map(|(d, a)| json!({"doc_id": d.doc_id, "text": d.text, "codes": a.positive_codes}))),
    )?;

    // gold items from the first documents; the answer is the planted sentence
    let mut gold = Vec::new();
    let mut responses = Vec::new();
    for (i, (doc_id, code, sentence, _)) in planted.positives.iter().take(24).enumerate() {
        let doc = corpus.document(doc_id).ok_or("missing document")?;
        let start = doc.sentences.iter().find(|s| &s.text == sentence).ok_or("planted sentence not segmented")?.start;
        let description = corpus.vocabulary.description(code).ok_or("missing label")?;
        let question = render_question(DEFAULT_TEMPLATE, description).map_err(|e| e.to_string())?;
        let item_id = format!("g{i:03}");
        gold.push(json!({
            "item_id": item_id,
            "question": question,
            "context_doc_id": doc_id,
            "answers": [{"text": sentence, "start": start}],
        }));
        let answer = json!({"start_idx": start, "span_text": sentence}).to_string();
        let raw = match i % 4 {
            0 => answer,
            1 => format!("Based on the document, the answer is:\n{answer}\nThis is supported by the text."),
            2 => json!({"start_idx": 0, "span_text": doc.sentences[0].text}).to_string(),
            _ => "I am unable to answer from this document.".to_string(),
        };
        responses.push(json!({"query_id": item_id, "raw": raw}));
    }
    write("gold.jsonl", jsonl(gold))?;
    write("responses.jsonl", jsonl(responses))?;
    std::fs::write(dir.join("config.toml"), CONFIG).map_err(|e| e.to_string())
}

fn pipeline(dir: &Path, workers: usize) -> Result<(), String> {
    let steps: [&[&str]; 9] = [
        &["train-classifier"],
        &["explain", "--model", "out/model.json"],
        &["generate", "--method", "xaiqa", "--importance", "out/importance.jsonl"],
        &["postprocess", "--pairs", "out/pairs_xaiqa.jsonl"],
        &["select", "--pairs", "out/pairs_xaiqa_pp.jsonl", "--r", "50"],
        &["qclo", "--gold", "data/gold.jsonl"],
        &["prompt-build", "--gold", "data/gold.jsonl", "--pairs", "out/pairs_xaiqa_pp.top50.jsonl"],
        &["parse-responses", "--responses", "data/responses.jsonl"],
        &["eval", "--gold", "data/gold.jsonl", "--pred", "out/predictions.jsonl", "--hardness", "out/hardness.jsonl"],
    ];
    for args in steps {
        let output = Command::new(env!("CARGO_BIN_EXE_xaiqa"))
            .current_dir(dir)
            .args(["--config", "config.toml", "--workers", &workers.to_string()])
            .args(args)
            .env("XAIQA_LOG", "error")
            .output()
            .map_err(|e| e.to_string())?;
        if !output.status.success() {
            return Err(format!("{}: {}", args[0], String::from_utf8_lossy(&output.stderr).trim()));
        }
    }
    Ok(())
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else if !path.to_string_lossy().ends_with(".timestamps.json") {
            out.insert(path.strip_prefix(root).unwrap_or(&path).to_path_buf(), std::fs::read(&path)?);
        }
    }
    Ok(())
}

pub fn run() -> Result<String, String> {
    let started = Instant::now();
    let mut trees = Vec::new();
    let mut dirs = Vec::new();
    for workers in [1, 3] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        write_inputs(dir.path())?;
        pipeline(dir.path(), workers)?;
        let mut files = BTreeMap::new();
        collect(dir.path(), dir.path(), &mut files).map_err(|e| e.to_string())?;
        trees.push(files);
        dirs.push(dir);
    }
    let (a, b) = (&trees[0], &trees[1]);
    for expected in ["out/model.json", "out/importance.jsonl", "out/pairs_xaiqa_pp.top50.jsonl", "out/prompts/manifest.json", "out/eval_report.json"] {
        if !a.contains_key(Path::new(expected)) {
            return Err(format!("{expected} was not produced"));
        }
    }
    let top: usize = String::from_utf8_lossy(&a[Path::new("out/pairs_xaiqa_pp.top50.jsonl")]).lines().count();
    if top != 50 {
        return Err(format!("select kept {top} pairs"));
    }
    if a.keys().ne(b.keys()) {
        return Err("the two runs produced different file sets".into());
    }
    if let Some((path, _)) = a.iter().find(|(p, bytes)| b[*p] != **bytes) {
        return Err(format!("{} differs between runs", path.display()));
    }
    let report: serde_json::Value = serde_json::from_slice(&a[Path::new("out/eval_report.json")]).map_err(|e| e.to_string())?;
    let em = &report["aggregates"][0]["em"]["mean"];
    let elapsed = started.elapsed();
    if elapsed >= Duration::from_secs(600) {
        return Err(format!("took {elapsed:.1?}"));
    }
    Ok(format!("{} artifacts byte-identical across runs (1 and 3 workers), EM {em}, {elapsed:.1?}", a.len()))
}
