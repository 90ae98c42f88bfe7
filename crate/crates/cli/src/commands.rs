use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use xaiqa::classifier::{self, LinearModel, RemoteScorer, Scorer};
use xaiqa::corpus::{load_corpus, Corpus};
use xaiqa::explainer::{document_seed, explain_all, ImportanceMatrix, MspConfig};
use xaiqa::generator::{self, GenerationRun, Method, QAPair};
use xaiqa::hardness::{compute_hardness, hardest_subset, HardnessRecord, STOPWORDS_VERSION};
use xaiqa::metrics::{self, AnnotationRecord, GoldItem, Prediction};
use xaiqa::promptkit::{self, ParseOptions};
use xaiqa::{jsonl, Error};

use crate::artifacts::{write_json, Run};
use crate::config::{ClassifierBackend, PipelineConfig};
use crate::{Command, CorpusArgs, StatsCommand};

/// Documents explained between appends to the importance file.
const EXPLAIN_CHUNK: usize = 32;

type Result<T> = anyhow::Result<T>;

fn output_dir(cfg: &PipelineConfig) -> Result<PathBuf> {
    let dir = cfg.paths.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn out_path(cfg: &PipelineConfig, explicit: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
    match explicit {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            Ok(p)
        }
        None => Ok(output_dir(cfg)?.join(default_name)),
    }
}

fn corpus_paths(cfg: &PipelineConfig, args: &CorpusArgs) -> Result<(PathBuf, PathBuf)> {
    let corpus = args.corpus.clone().or_else(|| cfg.paths.corpus.clone());
    let vocab = args.vocab.clone().or_else(|| cfg.paths.vocab.clone());
    match (corpus, vocab) {
        (Some(c), Some(v)) => Ok((c, v)),
        (c, v) => {
            let mut missing = Vec::new();
            if c.is_none() {
                missing.push("corpus (--corpus or paths.corpus)");
            }
            if v.is_none() {
                missing.push("vocabulary (--vocab or paths.vocab)");
            }
            Err(Error::InvalidConfig(format!("no {}", missing.join(", no "))).into())
        }
    }
}

fn open_corpus(run: &mut Run, cfg: &PipelineConfig, args: &CorpusArgs, extra: &[&Path]) -> Result<Corpus> {
    let (corpus, vocab) = corpus_paths(cfg, args)?;
    let mut all: Vec<&Path> = vec![&corpus, &vocab];
    all.extend_from_slice(extra);
    run.inputs(&all)?;
    Ok(load_corpus(&corpus, &vocab)?)
}

fn scorer(cfg: &PipelineConfig, model: Option<&Path>) -> Result<Box<dyn Scorer>> {
    match cfg.classifier.backend {
        ClassifierBackend::Builtin => {
            let path = model.ok_or_else(|| Error::InvalidConfig("the builtin classifier needs --model".into()))?;
            Ok(Box::new(LinearModel::load(path)?))
        }
        ClassifierBackend::Remote => {
            let endpoint = cfg.classifier.endpoint.as_deref().unwrap_or_default();
            Ok(Box::new(RemoteScorer::connect(endpoint, cfg.classifier.remote_batch_size)?))
        }
    }
}

fn embedder(cfg: &PipelineConfig, corpus: &Corpus) -> Result<Box<dyn xaiqa::embedder::Embedder>> {
    Ok(cfg.embedder.build(Some(corpus.documents.iter().map(|d| d.text.as_str()).collect()))?)
}

fn stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".jsonl").unwrap_or(&name).to_string()
}

pub fn dispatch(command: Command, mut cfg: PipelineConfig) -> Result<()> {
    match command {
        Command::TrainClassifier { corpus, epochs, out } => {
            if let Some(e) = epochs {
                cfg.classifier.epochs = e;
            }
            train_classifier(&cfg, &corpus, out)
        }
        Command::Explain { corpus, model, iterations, mask_probability, resume, out } => {
            if let Some(k) = iterations {
                cfg.explainer.iterations = k;
            }
            if let Some(p) = mask_probability {
                cfg.explainer.mask_probability = p;
            }
            cfg.explainer.validate()?;
            explain(&cfg, &corpus, model.as_deref(), resume, out)
        }
        Command::Generate { corpus, method, importance, template, out } => {
            if let Some(m) = method {
                cfg.generation.method = m;
            }
            if let Some(t) = template {
                cfg.generation.template = t;
            }
            generate(&cfg, &corpus, importance.as_deref(), out)
        }
        Command::Postprocess { corpus, pairs, out } => postprocess(&cfg, &corpus, &pairs, out),
        Command::Select { pairs, r, out } => {
            if let Some(r) = r {
                cfg.generation.top_r = r;
            }
            select(&cfg, &pairs, out)
        }
        Command::Mix { base, synthetic, ratio, out } => {
            if let Some(r) = ratio {
                let parsed = r.split_once(':').and_then(|(b, s)| Some((b.trim().parse().ok()?, s.trim().parse().ok()?)));
                let (b, s) = parsed.ok_or_else(|| Error::InvalidConfig(format!("ratio {r:?} is not of the form B:S")))?;
                cfg.generation.base_ratio = b;
                cfg.generation.synthetic_ratio = s;
            }
            mix(&cfg, &base, &synthetic, out)
        }
        Command::Qclo { corpus, gold, out } => qclo(&cfg, &corpus, &gold, out),
        Command::Subset { hardness, fraction, out } => subset(&cfg, &hardness, fraction, out),
        Command::Eval { gold, pred, hardness, out } => eval(&cfg, &gold, &pred, hardness.as_deref(), out),
        Command::Stats { command: StatsCommand::Welch { a, b, out } } => welch(&cfg, &a, &b, out),
        Command::Stats { command: StatsCommand::Annotations { records, methods, out } } => {
            annotations(&cfg, &records, methods.as_deref(), out)
        }
        Command::PromptBuild { corpus, gold, pairs, max_units, out } => {
            if let Some(m) = max_units {
                cfg.prompt.max_units = m;
            }
            prompt_build(&cfg, &corpus, &gold, pairs.as_deref(), out)
        }
        Command::ParseResponses { responses, out } => parse_responses(&cfg, &responses, out),
    }
}

fn train_classifier(cfg: &PipelineConfig, args: &CorpusArgs, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("train-classifier", cfg);
    let corpus = open_corpus(&mut run, cfg, args, &[])?;
    let model = LinearModel::train(&corpus, &cfg.classifier.train_config())?;
    let out = out_path(cfg, out, "model.json")?;
    model.save(&out)?;
    let scores = classifier::evaluate(&model, &corpus)?;
    log::info!("training micro-AP {:.4}, macro-AP {:.4}", scores.micro_ap, scores.macro_ap);
    let metrics_path = out.with_file_name(format!("{}.metrics.json", stem(&out).trim_end_matches(".json")));
    write_json(&metrics_path, &scores)?;
    run.finish(&[&out, &metrics_path])?;
    Ok(())
}

fn explain(cfg: &PipelineConfig, args: &CorpusArgs, model: Option<&Path>, resume: bool, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("explain", cfg);
    let corpus = open_corpus(&mut run, cfg, args, model.into_iter().collect::<Vec<_>>().as_slice())?;
    let scorer = scorer(cfg, model)?;
    let out = out_path(cfg, out, "importance.jsonl")?;
    let mut done = BTreeSet::new();
    if resume && out.is_file() {
        let existing: Vec<ImportanceMatrix> = jsonl::read(&out)?;
        for m in &existing {
            let expected = MspConfig { seed: document_seed(cfg.explainer.seed, &m.doc_id), ..cfg.explainer.clone() };
            if m.config.as_ref() != Some(&expected) || m.labels != scorer.labels() {
                return Err(Error::InvalidConfig(format!(
                    "cannot resume: {} holds a matrix for {:?} computed with different settings",
                    out.display(),
                    m.doc_id
                ))
                .into());
            }
            done.insert(m.doc_id.clone());
        }
        log::info!("resuming: {} documents already explained", done.len());
    } else {
        jsonl::write::<ImportanceMatrix>(&out, [])?;
    }
    let todo: Vec<_> = corpus.documents.iter().filter(|d| !done.contains(&d.doc_id)).cloned().collect();
    for (i, chunk) in todo.chunks(EXPLAIN_CHUNK).enumerate() {
        let matrices = explain_all(chunk, scorer.as_ref(), &cfg.explainer)?;
        jsonl::append(&out, &matrices)?;
        log::info!("explained {} of {} documents", (i * EXPLAIN_CHUNK + chunk.len()).min(todo.len()), todo.len());
    }
    run.param("resume", resume);
    run.finish(&[&out])?;
    Ok(())
}

fn generation_run(cfg: &PipelineConfig, method: Method) -> GenerationRun {
    let settings = match method {
        Method::Xaiqa => json!({"generation": cfg.generation, "explainer": cfg.explainer, "classifier": cfg.classifier}),
        Method::XaiqaPp | Method::Cosine => json!({"generation": cfg.generation, "embedder": cfg.embedder}),
        Method::Random | Method::Base => json!({"generation": cfg.generation}),
    };
    GenerationRun::new(method, settings)
}

fn generate(cfg: &PipelineConfig, args: &CorpusArgs, importance: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let method = cfg.generation.method;
    let mut run = Run::new("generate", cfg);
    let corpus = open_corpus(&mut run, cfg, args, importance.into_iter().collect::<Vec<_>>().as_slice())?;
    let gen = generation_run(cfg, method);
    let template = &cfg.generation.template;
    let pairs = match method {
        Method::Xaiqa => {
            let path = importance.ok_or_else(|| Error::InvalidConfig("--method xaiqa needs --importance".into()))?;
            let matrices: Vec<ImportanceMatrix> = jsonl::read(path)?;
            generator::generate_xaiqa(&corpus, &matrices, template, &gen.run_id)?
        }
        Method::Cosine => generator::generate_cosine(&corpus, embedder(cfg, &corpus)?.as_ref(), template, &gen.run_id)?,
        Method::Random => generator::generate_random(&corpus, cfg.generation.seed, template, &gen.run_id)?,
        Method::XaiqaPp | Method::Base => {
            return Err(Error::InvalidConfig(format!("method {method} is not generated directly; use postprocess or mix")).into())
        }
    };
    let out = out_path(cfg, out, &format!("pairs_{method}.jsonl"))?;
    jsonl::write(&out, &pairs)?;
    run.param("method", method);
    run.param("run_id", &gen.run_id);
    run.finish(&[&out])?;
    Ok(())
}

fn postprocess(cfg: &PipelineConfig, args: &CorpusArgs, pairs_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("postprocess", cfg);
    let corpus = open_corpus(&mut run, cfg, args, &[pairs_path])?;
    let pairs: Vec<QAPair> = jsonl::read(pairs_path)?;
    let processed = generator::postprocess(&pairs, &corpus, embedder(cfg, &corpus)?.as_ref())?;
    let out = out_path(cfg, out, "pairs_xaiqa_pp.jsonl")?;
    jsonl::write(&out, &processed)?;
    run.finish(&[&out])?;
    Ok(())
}

fn select(cfg: &PipelineConfig, pairs_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("select", cfg);
    run.inputs(&[pairs_path])?;
    let pairs: Vec<QAPair> = jsonl::read(pairs_path)?;
    let top = generator::select_top_r(&pairs, cfg.generation.top_r)?;
    let out = out_path(cfg, out, &format!("{}.top{}.jsonl", stem(pairs_path), cfg.generation.top_r))?;
    jsonl::write(&out, &top)?;
    run.param("r", cfg.generation.top_r);
    run.finish(&[&out])?;
    Ok(())
}

fn mix(cfg: &PipelineConfig, base: &Path, synthetic: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("mix", cfg);
    run.inputs(&[base, synthetic])?;
    let base_pairs: Vec<QAPair> = jsonl::read(base)?;
    let synthetic_pairs: Vec<QAPair> = jsonl::read(synthetic)?;
    let ratio = (cfg.generation.base_ratio, cfg.generation.synthetic_ratio);
    let mixed = generator::mix(&base_pairs, &synthetic_pairs, ratio, cfg.generation.seed)?;
    let out = out_path(cfg, out, &format!("mixed_{}to{}.jsonl", ratio.0, ratio.1))?;
    jsonl::write(&out, &mixed)?;
    run.param("ratio", format!("{}:{}", ratio.0, ratio.1));
    run.finish(&[&out])?;
    Ok(())
}

fn qclo(cfg: &PipelineConfig, args: &CorpusArgs, gold_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("qclo", cfg);
    let corpus = open_corpus(&mut run, cfg, args, &[gold_path])?;
    let gold: Vec<GoldItem> = jsonl::read(gold_path)?;
    let index = corpus.doc_index();
    let mut items = Vec::with_capacity(gold.len());
    for g in &gold {
        let i = index.get(g.context_doc_id.as_str()).ok_or_else(|| Error::UnknownDocument(g.context_doc_id.clone()))?;
        items.push((g.item_id.as_str(), g.question.as_str(), corpus.documents[*i].text.as_str()));
    }
    let report = compute_hardness(items, &cfg.hardness);
    let out = out_path(cfg, out, "hardness.jsonl")?;
    jsonl::write(&out, &report.records)?;
    let undefined = out.with_file_name(format!("{}.undefined.json", stem(&out)));
    write_json(&undefined, &report.undefined)?;
    run.param("stopwords_version", STOPWORDS_VERSION);
    run.finish(&[&out, &undefined])?;
    Ok(())
}

fn subset(cfg: &PipelineConfig, hardness: &Path, fraction: f64, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("subset", cfg);
    run.inputs(&[hardness])?;
    let records: Vec<HardnessRecord> = jsonl::read(hardness)?;
    let chosen = hardest_subset(&records, fraction)?;
    let out = out_path(cfg, out, &format!("{}.hardest{fraction}.jsonl", stem(hardness)))?;
    jsonl::write(&out, &chosen)?;
    run.param("fraction", fraction);
    run.finish(&[&out])?;
    Ok(())
}

fn eval(cfg: &PipelineConfig, gold_path: &Path, pred_path: &Path, hardness: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("eval", cfg);
    let mut inputs = vec![gold_path, pred_path];
    inputs.extend(hardness);
    run.inputs(&inputs)?;
    let gold: Vec<GoldItem> = jsonl::read(gold_path)?;
    let predictions: Vec<Prediction> = jsonl::read(pred_path)?;
    let mut strata = BTreeMap::new();
    if let Some(h) = hardness {
        let records: Vec<HardnessRecord> = jsonl::read(h)?;
        for &f in &cfg.metrics.strata_fractions {
            let ids = hardest_subset(&records, f)?.into_iter().map(|r| r.item_id).collect();
            strata.insert(format!("hardest_{:05.1}pct", f * 100.0), ids);
        }
    }
    let report = metrics::evaluate(&gold, &predictions, &strata, &cfg.metrics.bootstrap())?;
    let out = out_path(cfg, out, "eval_report.json")?;
    write_json(&out, &report)?;
    let table = out.with_extension("txt");
    std::fs::write(&table, report.to_table()).with_context(|| format!("writing {}", table.display()))?;
    print!("{}", report.to_table());
    run.finish(&[&out, &table])?;
    Ok(())
}

fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(values) = serde_json::from_str::<Vec<serde_json::Value>>(&text) {
        return values
            .iter()
            .map(|v| v.as_f64().or_else(|| v.as_bool().map(|b| b as u8 as f64)))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::InvalidInput(format!("{}: expected numbers or booleans", path.display())).into());
    }
    text.split_whitespace()
        .map(|t| match t {
            "true" => Ok(1.0),
            "false" => Ok(0.0),
            _ => t.parse::<f64>().map_err(|_| Error::InvalidInput(format!("{}: {t:?} is not a number", path.display())).into()),
        })
        .collect()
}

fn welch(cfg: &PipelineConfig, a: &Path, b: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("stats welch", cfg);
    run.inputs(&[a, b])?;
    let (xa, xb) = (read_sample(a)?, read_sample(b)?);
    let r = metrics::welch_t_test(&xa, &xb)?;
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let result = json!({
        "n_a": xa.len(), "n_b": xb.len(), "mean_a": mean(&xa), "mean_b": mean(&xb),
        "t": r.t, "df": r.df, "p_two_sided": r.p_two_sided,
    });
    let out = out_path(cfg, out, "welch.json")?;
    write_json(&out, &result)?;
    println!("{}", serde_json::to_string(&result)?);
    run.finish(&[&out])?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PairMethod {
    pair_id: String,
    method: String,
}

#[derive(Debug, Serialize)]
struct FieldAgreement {
    agreement: f64,
    kappa: f64,
}

fn annotations(cfg: &PipelineConfig, records_path: &Path, methods: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("stats annotations", cfg);
    let mut inputs = vec![records_path];
    inputs.extend(methods);
    run.inputs(&inputs)?;
    let records: Vec<AnnotationRecord> = jsonl::read(records_path)?;
    let combined = metrics::combine_annotations(&records)?;
    let pair_methods: BTreeMap<String, String> = match methods {
        Some(p) => jsonl::read::<PairMethod>(p)?.into_iter().map(|m| (m.pair_id, m.method)).collect(),
        None => BTreeMap::new(),
    };
    // combine_annotations guarantees two distinct annotators per pair
    let mut by_pair: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in &records {
        by_pair.entry(&r.pair_id).or_default().push(r);
    }
    let mut agreement = BTreeMap::new();
    let fields: [(&str, fn(&AnnotationRecord) -> bool); 4] = [
        ("correct", |r| r.correct),
        ("lexical", |r| r.lexical),
        ("abbreviation", |r| r.abbreviation),
        ("negation", |r| r.negation),
    ];
    for (name, get) in fields {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for rs in by_pair.values_mut() {
            rs.sort_by(|x, y| x.annotator_id.cmp(&y.annotator_id));
            a.push(get(rs[0]));
            b.push(get(rs[1]));
        }
        agreement.insert(
            name,
            FieldAgreement { agreement: metrics::agreement(&a, &b)?, kappa: metrics::cohen_kappa(&a, &b)? },
        );
    }
    let summary = json!({
        "counts_by_method": metrics::counts_by_method(&combined, &pair_methods),
        "agreement": agreement,
        "pairs": combined,
    });
    let out = out_path(cfg, out, "annotation_summary.json")?;
    write_json(&out, &summary)?;
    run.finish(&[&out])?;
    Ok(())
}

fn safe_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && !id.starts_with('.')
}

fn prompt_build(cfg: &PipelineConfig, args: &CorpusArgs, gold_path: &Path, pairs: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("prompt-build", cfg);
    let mut extra = vec![gold_path];
    extra.extend(pairs);
    let corpus = open_corpus(&mut run, cfg, args, &extra)?;
    let gold: Vec<GoldItem> = jsonl::read(gold_path)?;
    if let Some(bad) = gold.iter().find(|g| !safe_id(&g.item_id)) {
        return Err(Error::InvalidInput(format!("item id {:?} cannot be used as a file name", bad.item_id)).into());
    }
    let examples = match pairs {
        Some(p) => {
            let ranked: Vec<QAPair> = jsonl::read(p)?;
            let p = &cfg.prompt;
            promptkit::sample_examples(&ranked, &corpus, p.num_examples, p.window_radius, p.seed)?
        }
        None => Vec::new(),
    };
    let budget = cfg.prompt.budget();
    let index = corpus.doc_index();
    let prompts = gold
        .par_iter()
        .map(|g| {
            let i = index.get(g.context_doc_id.as_str()).ok_or_else(|| Error::UnknownDocument(g.context_doc_id.clone()))?;
            promptkit::assemble_prompt(&g.item_id, &examples, &g.question, &corpus.documents[*i].text, &budget)
        })
        .collect::<xaiqa::Result<Vec<_>>>()?;
    let out = out_path(cfg, out, "prompts")?;
    promptkit::write_prompt_bundle(&out, &prompts)?;
    let examples_path = out.join("examples.jsonl");
    jsonl::write(&examples_path, &examples)?;
    run.finish(&[&out])?;
    Ok(())
}

fn parse_responses(cfg: &PipelineConfig, responses: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("parse-responses", cfg);
    run.inputs(&[responses])?;
    let opts = ParseOptions { recover_unclosed: cfg.prompt.recover_unclosed };
    let predictions: Vec<Prediction> = promptkit::read_responses(responses)?
        .iter()
        .map(|r| promptkit::parse_model_answer(&r.query_id, &r.raw, opts))
        .collect();
    let failed = predictions.iter().filter(|p| p.parse_failed).count();
    if failed > 0 {
        log::warn!("{failed} of {} responses had no parsable answer; recorded as abstentions", predictions.len());
    }
    let out = out_path(cfg, out, "predictions.jsonl")?;
    jsonl::write(&out, &predictions)?;
    run.finish(&[&out])?;
    Ok(())
}
