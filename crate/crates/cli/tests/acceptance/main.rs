//! Acceptance criteria, one PASS/FAIL line each.

mod e2e;
mod fixtures;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xaiqa::classifier::{self, LinearModel, ScoreMatrix, Scorer, TrainConfig};
use xaiqa::corpus::{Corpus, Document, Label, LabelAssignment, LabelVocabulary, SegmenterConfig};
use xaiqa::embedder::{BuiltinEmbedder, Embedder, EmbedderConfig, EmbeddingVector};
use xaiqa::explainer::{explain, explain_all, explain_exhaustive, MspConfig};
use xaiqa::generator::{self, Method, QAPair, DEFAULT_TEMPLATE};
use xaiqa::hardness::{self, porter_stem, HardnessRecord, QcloConfig};
use xaiqa::metrics::{
    bootstrap_ci, cohen_kappa, exact_match, rouge2_recall, token_f1, welch_t_test, BootstrapConfig,
};
use xaiqa::promptkit::{self, BudgetUnit, FewShotExample, ParseOptions, PromptBudget};
use xaiqa::text;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Noisy-OR over weighted keywords, one keyword list per label.
struct NoisyOr {
    labels: Vec<String>,
    keywords: Vec<Vec<(String, f64)>>,
    base: f64,
}

impl Scorer for NoisyOr {
    fn labels(&self) -> &[String] {
        &self.labels
    }
    fn score(&self, texts: &[String]) -> xaiqa::Result<ScoreMatrix> {
        let rows = texts
            .iter()
            .map(|t| {
                let words: BTreeSet<String> = text::tokenize(t).into_iter().collect();
                self.keywords
                    .iter()
                    .map(|kws| {
                        let miss: f64 = kws.iter().filter(|(k, _)| words.contains(k)).map(|(_, w)| 1.0 - w).product();
                        1.0 - (1.0 - self.base) * miss
                    })
                    .collect()
            })
            .collect();
        ScoreMatrix::from_rows(self.labels.len(), rows)
    }
}

fn ac1_explainer_oracle() -> Outcome {
    let started = Instant::now();
    let vocab = ["fever", "cough", "rash", "edema", "nausea", "stable", "chills", "wheeze"];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let n_fixtures = 24;
    for f in 0..n_fixtures {
        let m = rng.random_range(2..=6);
        let text: Vec<String> = (0..m)
            .map(|_| {
                let a = vocab.choose(&mut rng).unwrap();
                let b = vocab.choose(&mut rng).unwrap();
                format!("Noted {a} and {b} today.")
            })
            .collect();
        let doc = Document::new(format!("f{f}"), text.join(" "), &SegmenterConfig::default());
        ensure!(doc.sentences.len() == m, "fixture {f}: {} sentences, expected {m}", doc.sentences.len());
        let n_labels = rng.random_range(1..=3);
        let scorer = NoisyOr {
            labels: (0..n_labels).map(|j| format!("L{j}")).collect(),
            keywords: (0..n_labels)
                .map(|_| {
                    let k = rng.random_range(1..=3);
                    vocab
                        .choose_multiple(&mut rng, k)
                        .map(|k| (k.to_string(), rng.random_range(0.1..0.9)))
                        .collect()
                })
                .collect(),
            base: rng.random_range(0.0..0.2),
        };
        let cfg = MspConfig { iterations: 20_000, mask_probability: 0.5, seed: f, ..MspConfig::default() };
        let approx = explain(&doc, &scorer, &cfg).map_err(|e| e.to_string())?;
        let exact = explain_exhaustive(&doc, &scorer, &cfg.mask_token).map_err(|e| e.to_string())?;
        for (ra, re) in approx.scores.iter().zip(&exact.scores) {
            for (a, e) in ra.iter().zip(re) {
                worst = worst.max((a - e).abs());
            }
        }
    }
    ensure!(worst < 0.02, "max abs error {worst:.4} over {n_fixtures} fixtures");

    // Hand enumeration: the scorer is 1 iff "fever" appears, and fever is only
    // in sentence 1. Over the 8 masks, sentence 1 unmasked always scores 1 and
    // masked always 0; sentences 0 and 2 see the same mix either way.
    let doc = Document::new("fever", "No complaints. Reports fever overnight. Discharged home.", &SegmenterConfig::default());
    let scorer = NoisyOr { labels: vec!["A".into()], keywords: vec![vec![("fever".into(), 1.0)]], base: 0.0 };
    let exact = explain_exhaustive(&doc, &scorer, "[MASK]").map_err(|e| e.to_string())?;
    ensure!(exact.scores == vec![vec![0.0], vec![1.0], vec![0.0]], "fever fixture scores {:?}", exact.scores);
    ensure!(exact.counts_masked == vec![4; 3] && exact.counts_unmasked == vec![4; 3], "fever fixture counts");

    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:.1?}");
    Ok(format!("{n_fixtures} fixtures, max abs error {worst:.4}, fever fixture exact, {elapsed:.1?}"))
}

fn ac2_planted_signal() -> Outcome {
    let started = Instant::now();
    let planted = fixtures::planted_corpus(50, false, 7);
    let corpus = &planted.corpus;
    // construction oracle: every label has positives and negatives, and the
    // drug names occur only in their own positive documents
    for (code, _, drug) in fixtures::LABELS {
        let pos = corpus.assignments.iter().filter(|a| a.has_label(code)).count();
        ensure!(pos > 0 && pos < corpus.documents.len(), "label {code} has {pos} positives");
        for (d, a) in corpus.documents.iter().zip(&corpus.assignments) {
            ensure!(d.text.contains(drug) == a.has_label(code), "{drug} leaks into {}", d.doc_id);
        }
    }
    let model = LinearModel::train(corpus, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let metrics = classifier::evaluate(&model, corpus).map_err(|e| e.to_string())?;
    ensure!(metrics.micro_ap >= 0.95, "micro-AP {:.4}", metrics.micro_ap);
    let cfg = MspConfig { iterations: 200, ..MspConfig::default() };
    let importance = explain_all(&corpus.documents, &model, &cfg).map_err(|e| e.to_string())?;
    let pairs = generator::generate_xaiqa(corpus, &importance, DEFAULT_TEMPLATE, "ac2").map_err(|e| e.to_string())?;
    ensure!(pairs.len() == planted.positives.len(), "{} pairs for {} positives", pairs.len(), planted.positives.len());
    let expected: BTreeMap<(&str, &str), &str> =
        planted.positives.iter().map(|(d, c, s, _)| ((d.as_str(), c.as_str()), s.as_str())).collect();
    let hits = pairs
        .iter()
        .filter(|p| expected.get(&(p.doc_id.as_str(), p.label_code.as_str())) == Some(&p.answer.text.as_str()))
        .count();
    let rate = hits as f64 / pairs.len() as f64;
    let elapsed = started.elapsed();
    ensure!(rate >= 0.90, "planted sentence selected for {hits}/{} pairs", pairs.len());
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:.1?}");
    Ok(format!("micro-AP {:.4}, planted hit rate {hits}/{} ({:.1}%), {elapsed:.1?}", metrics.micro_ap, pairs.len(), 100.0 * rate))
}

fn ac3_cosine_divergence() -> Outcome {
    let planted = fixtures::planted_corpus(50, true, 11);
    let corpus = &planted.corpus;
    let qcfg = QcloConfig::default();
    // construction oracle: the drug sentence shares no content word with the
    // question, the verbatim sentence contains every description word, and
    // each verbatim sentence also appears in negative documents
    for (code, description, drug) in fixtures::LABELS {
        let question = generator::render_question(DEFAULT_TEMPLATE, description).map_err(|e| e.to_string())?;
        let q = qcfg.normalize(&question);
        for v in 0..3 {
            let s = fixtures::drug_sentence(drug, v);
            ensure!(q.is_disjoint(&qcfg.normalize(&s)), "drug sentence {s:?} overlaps the question");
        }
        let verbatim = fixtures::verbatim_sentence(description);
        let desc_tokens: BTreeSet<String> = text::tokenize(description).into_iter().collect();
        let verb_tokens: BTreeSet<String> = text::tokenize(&verbatim).into_iter().collect();
        ensure!(desc_tokens.is_subset(&verb_tokens), "verbatim sentence {verbatim:?}");
        let negatives_with = corpus
            .documents
            .iter()
            .zip(&corpus.assignments)
            .filter(|(d, a)| !a.has_label(code) && d.text.contains(&verbatim))
            .count();
        ensure!(negatives_with > 0, "verbatim sentence for {code} never appears in a negative document");
        for f in fixtures::FILLERS {
            ensure!(q.is_disjoint(&qcfg.normalize(f)), "filler {f:?} overlaps the question");
        }
    }

    let model = LinearModel::train(corpus, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let cfg = MspConfig { iterations: 200, ..MspConfig::default() };
    let importance = explain_all(&corpus.documents, &model, &cfg).map_err(|e| e.to_string())?;
    let xaiqa = generator::generate_xaiqa(corpus, &importance, DEFAULT_TEMPLATE, "ac3").map_err(|e| e.to_string())?;
    let embedder = EmbedderConfig::default()
        .build(Some(corpus.documents.iter().map(|d| d.text.as_str()).collect()))
        .map_err(|e| e.to_string())?;
    let cosine = generator::generate_cosine(corpus, embedder.as_ref(), DEFAULT_TEMPLATE, "ac3").map_err(|e| e.to_string())?;
    ensure!(xaiqa.len() == cosine.len() && xaiqa.len() == planted.positives.len(), "pair counts differ");
    let verbatim: BTreeMap<(&str, &str), &str> = planted
        .positives
        .iter()
        .map(|(d, c, _, v)| ((d.as_str(), c.as_str()), v.as_deref().unwrap_or_default()))
        .collect();
    let key = |p: &QAPair| (p.doc_id.clone(), p.label_code.clone());
    let cos_by: BTreeMap<_, _> = cosine.iter().map(|p| (key(p), p)).collect();
    let differ = xaiqa.iter().filter(|p| cos_by[&key(p)].answer.text != p.answer.text).count();
    let cos_verbatim =
        cosine.iter().filter(|p| verbatim[&(p.doc_id.as_str(), p.label_code.as_str())] == p.answer.text).count();
    let n = xaiqa.len() as f64;
    ensure!(differ as f64 / n >= 0.80, "xaiqa differs from cosine on {differ}/{n}");
    ensure!(cos_verbatim as f64 / n >= 0.90, "cosine picks the verbatim sentence on {cos_verbatim}/{n}");
    Ok(format!("{} pairs: xaiqa differs from cosine on {differ}, cosine verbatim on {cos_verbatim}", xaiqa.len()))
}

/// Word counts over a fixed vocabulary, so cosines can be worked out by hand.
struct BagOfWords {
    vocab: Vec<String>,
}

impl Embedder for BagOfWords {
    fn dim(&self) -> usize {
        self.vocab.len()
    }
    fn embed(&self, texts: &[String]) -> xaiqa::Result<Vec<EmbeddingVector>> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.vocab.len()];
                for tok in text::tokenize(t) {
                    let i = self.vocab.binary_search(&tok).expect("token in vocabulary");
                    v[i] += 1.0;
                }
                EmbeddingVector(v)
            })
            .collect())
    }
}

fn ac4_postprocess() -> Outcome {
    // (sentence, question, expected segment). Only the expected segment shares
    // a word with the question, except in the last fixture, where two
    // segments tie and the first wins.
    let cases: [(&str, &str, &str); 10] = [
        (
            "Meds: 1) aspirin daily 2) lisinopril for hypertension 3) statin.",
            "Does the patient have hypertension in their medical history?",
            "2) lisinopril for hypertension",
        ),
        ("Problems include asthma; GERD; chronic back pain.", "Does the patient have GERD in their medical history?", "GERD;"),
        ("• diabetes • hypertension • gout.", "Does the patient have gout?", "• gout."),
        ("Allergies - penicillin - sulfa drugs - latex.", "Is the patient allergic to latex?", "- latex."),
        ("History: -CAD -CHF -COPD.", "Does the patient have COPD?", "-COPD."),
        ("(1) fever (2) cough (3) rash noted.", "Does the patient have a rash?", "(3) rash noted."),
        ("Patient denies chest pain.", "Does the patient have chest pain?", "Patient denies chest pain."),
        (
            "Seen for migraine; started sumatriptan; follow up within 2 weeks.",
            "Does the patient have migraine in their medical history?",
            "Seen for migraine;",
        ),
        ("Diagnoses 1) anemia 2) CKD stage 3 3) hyperkalemia.", "Does the patient have hyperkalemia?", "3) hyperkalemia."),
        ("Pain in knee; pain in hip.", "Does the patient have pain?", "Pain in knee;"),
    ];
    let lead = "Seen in clinic today. ";
    let mut documents = Vec::new();
    let mut assignments = Vec::new();
    for (i, (sentence, _, _)) in cases.iter().enumerate() {
        documents.push(Document::new(format!("pp{i}"), format!("{lead}{sentence}"), &SegmenterConfig::default()));
        assignments.push(LabelAssignment { doc_id: format!("pp{i}"), positive_codes: ["X".to_string()].into() });
    }
    let vocab = LabelVocabulary::new(vec![Label { code: "X".into(), description: "x".into() }]).map_err(|e| e.to_string())?;
    let corpus = Corpus::new(documents, vocab, assignments).map_err(|e| e.to_string())?;
    let pairs: Vec<QAPair> = cases
        .iter()
        .enumerate()
        .map(|(i, (sentence, question, _))| {
            let doc = &corpus.documents[i];
            assert_eq!(doc.sentences.len(), 2, "fixture {i} segmentation");
            assert_eq!(doc.sentences[1].text, *sentence);
            QAPair {
                question: question.to_string(),
                answer: (&doc.sentences[1]).into(),
                doc_id: doc.doc_id.clone(),
                label_code: "X".into(),
                method: Method::Xaiqa,
                score: 1.0,
                run_id: "ac4".into(),
            }
        })
        .collect();

    let mut words: BTreeSet<String> = BTreeSet::new();
    for (s, q, _) in &cases {
        words.extend(text::tokenize(s));
        words.extend(text::tokenize(q));
    }
    let bow = BagOfWords { vocab: words.into_iter().collect() };
    let builtin = BuiltinEmbedder::new(2048, 0).map_err(|e| e.to_string())?;
    let embedders: [(&str, &dyn Embedder); 2] = [("bag-of-words", &bow), ("builtin", &builtin)];
    for (name, embedder) in embedders {
        let out = generator::postprocess(&pairs, &corpus, embedder).map_err(|e| e.to_string())?;
        for (i, (p, q)) in pairs.iter().zip(&out).enumerate() {
            let doc = &corpus.documents[i];
            ensure!(q.answer.end - q.answer.start <= p.answer.end - p.answer.start, "{name} fixture {i}: answer grew");
            ensure!(doc.slice(q.answer.start, q.answer.end) == Some(q.answer.text.as_str()), "{name} fixture {i}: not a substring");
            ensure!(q.method == Method::XaiqaPp, "{name} fixture {i}: method {:?}", q.method);
            ensure!(q.answer.text == cases[i].2, "{name} fixture {i}: got {:?}, expected {:?}", q.answer.text, cases[i].2);
        }
    }
    Ok(format!("{} fixtures, two embedders", cases.len()))
}

fn ac5_metrics() -> Outcome {
    // bigrams of the reference: he was, was diagnosed, diagnosed with, with
    // hypertension; the prediction has the last two
    let r = rouge2_recall("diagnosed with hypertension", "he was diagnosed with hypertension");
    ensure!(r == 0.5, "rouge2 {r}");
    // one shared token out of two on each side
    let f = token_f1("fever cough", "cough rash");
    ensure!(f == 0.5, "token F1 {f}");

    let em_table: [(&str, &str, f64); 12] = [
        ("Hypertension", "hypertension", 1.0),
        ("The hypertension.", "hypertension", 1.0),
        ("  on   lisinopril ", "on lisinopril", 1.0),
        ("Lisinopril, 10 mg!", "lisinopril 10 mg", 1.0),
        ("an MRI", "MRI", 1.0),
        ("A fever", "the fever", 1.0),
        ("hypertension", "chronic hypertension", 0.0),
        ("", "", 1.0),
        ("", "fever", 0.0),
        ("e.g. fever", "eg fever", 1.0),
        ("theophylline", "ophylline", 0.0),
        ("fever\tand\nchills", "Fever and chills.", 1.0),
    ];
    for (pred, gold, want) in em_table {
        let got = exact_match(pred, gold);
        ensure!(got == want, "EM({pred:?}, {gold:?}) = {got}, expected {want}");
    }

    let words = ["fever", "cough", "the", "a", "an", "rash", "Hypertension", "on", "lisinopril", "10", "mg", "chest", "pain"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut n_em = 0;
    for i in 0..1000 {
        let len = rng.random_range(0..6);
        let reference: Vec<String> = (0..len).map(|_| words.choose(&mut rng).unwrap().to_string()).collect();
        let prediction = if i % 2 == 0 {
            // same answer modulo case, punctuation, articles and spacing
            let mut out = String::new();
            for w in &reference {
                if rng.random_bool(0.3) {
                    out.push_str(["the ", "a ", "an "].choose(&mut rng).unwrap());
                }
                let w = if rng.random_bool(0.5) { w.to_uppercase() } else { w.clone() };
                out.push_str(&w);
                out.push_str([" ", "  ", ", ", ". ", "\t"].choose(&mut rng).unwrap());
            }
            out
        } else {
            let n = rng.random_range(0..6);
            (0..n).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ")
        };
        let reference = reference.join(" ");
        let em = exact_match(&prediction, &reference);
        let f1 = token_f1(&prediction, &reference);
        let r2 = rouge2_recall(&prediction, &reference);
        ensure!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&r2), "metric out of range on {prediction:?} / {reference:?}");
        if em == 1.0 {
            n_em += 1;
            ensure!(f1 == 1.0, "EM=1 but F1={f1} on {prediction:?} / {reference:?}");
        }
    }
    ensure!(n_em >= 400, "only {n_em} exact matches among the random pairs");
    Ok(format!("fixtures exact; EM=>F1=1 on 1000 pairs ({n_em} exact matches)"))
}

fn ac6_statistics() -> Outcome {
    let bern = |k: usize, n: usize| -> Vec<f64> { (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect() };
    let w = welch_t_test(&bern(65, 200), &bern(30, 200)).map_err(|e| e.to_string())?;
    ensure!(w.p_two_sided < 0.001, "Welch p = {}", w.p_two_sided);

    // (both yes, a only, b only, both no) -> kappa from p_o and p_e by hand
    let tables: [((usize, usize, usize, usize), f64); 5] = [
        // p_o 0.7, p_a 0.5, p_b 0.6, p_e 0.5
        ((4, 1, 2, 3), 0.4),
        // p_o 0.8, p_a 0.6, p_b 0.5, p_e 0.5
        ((9, 3, 1, 7), 0.6),
        // p_o 0, p_e 0.5
        ((0, 5, 5, 0), -1.0),
        // p_e = 1
        ((6, 0, 0, 0), 1.0),
        // p_o 0.8, p_a = p_b = 0.9, p_e 0.82
        ((8, 1, 1, 0), -1.0 / 9.0),
    ];
    for ((yy, yn, ny, nn), want) in tables {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (n, x, y) in [(yy, true, true), (yn, true, false), (ny, false, true), (nn, false, false)] {
            a.extend(std::iter::repeat_n(x, n));
            b.extend(std::iter::repeat_n(y, n));
        }
        let k = cohen_kappa(&a, &b).map_err(|e| e.to_string())?;
        ensure!((k - want).abs() < 1e-12, "kappa {k} for {:?}, expected {want}", (yy, yn, ny, nn));
    }

    for c in [0.625, 0.1, 1.0 / 3.0] {
        let ci = bootstrap_ci(&vec![c; 37], &BootstrapConfig::default()).map_err(|e| e.to_string())?;
        ensure!(ci.mean == c && ci.low == c && ci.high == c, "bootstrap of constant {c}: {ci:?}");
    }
    Ok(format!("Welch p = {:.2e}, 5 kappa tables, degenerate bootstrap exact", w.p_two_sided))
}

fn ac7_qclo() -> Outcome {
    let voc = include_str!("../../../core/tests/data/porter_voc.txt");
    let output = include_str!("../../../core/tests/data/porter_output.txt");
    let mut n = 0;
    for (word, stem) in voc.lines().zip(output.lines()) {
        let got = porter_stem(word);
        ensure!(got == stem, "porter({word}) = {got}, expected {stem}");
        n += 1;
    }
    ensure!(n == voc.lines().count() && n == output.lines().count() && n > 20_000, "vocabulary sizes");

    let cfg = QcloConfig::default();
    let cases: [(&str, &str, Option<f64>); 6] = [
        // {esophag, reflux} vs {reflux, symptom, note}
        ("Does the patient have esophageal reflux?", "Reflux symptoms noted.", Some(0.5)),
        ("Does the patient have hypertension?", "Hypertension controlled.", Some(1.0)),
        // {chest, pain} vs {deni, pain}
        ("Does the patient have chest pain?", "Denies pain.", Some(0.5)),
        ("Is the patient on lisinopril?", "No meds.", Some(0.0)),
        ("Does the patient have diabetic neuropathy?", "Neuropathies from diabetes.", Some(1.0)),
        ("Does the patient have it?", "Anything at all.", None),
    ];
    for (q, c, want) in cases {
        let got = hardness::qclo(q, c, &cfg);
        ensure!(got == want, "qclo({q:?}, {c:?}) = {got:?}, expected {want:?}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in 0..1000 {
        let n = rng.random_range(1..=200);
        let records: Vec<HardnessRecord> = (0..n)
            .map(|i| HardnessRecord {
                item_id: format!("i{i:03}"),
                qclo: if rng.random_bool(0.5) { f64::from(rng.random_range(0..5u8)) / 4.0 } else { rng.random() },
            })
            .collect();
        let mut fractions = vec![0.05, 0.10, 0.25, 0.50, 1.0, rng.random_range(0.001..1.0)];
        fractions.sort_by(f64::total_cmp);
        let mut previous: Option<BTreeSet<String>> = None;
        for f in fractions {
            let subset = hardness::hardest_subset(&records, f).map_err(|e| e.to_string())?;
            let want = ((f * n as f64 + 1e-9).floor() as usize).clamp(1, n);
            ensure!(subset.len() == want, "table {t}: |hardest {f}| = {}, expected {want}", subset.len());
            let ids: BTreeSet<String> = subset.iter().map(|r| r.item_id.clone()).collect();
            if let Some(prev) = &previous {
                ensure!(prev.is_subset(&ids), "table {t}: subsets not nested at {f}");
            }
            let worst_in = subset.iter().map(|r| r.qclo).fold(f64::NEG_INFINITY, f64::max);
            let best_out = records.iter().filter(|r| !ids.contains(&r.item_id)).map(|r| r.qclo).fold(f64::INFINITY, f64::min);
            ensure!(worst_in <= best_out, "table {t}: subset at {f} is not the hardest");
            previous = Some(ids);
        }
    }
    Ok(format!("{n} Porter words, 6 QCLO fixtures, nesting over 1000 tables"))
}

fn ac8_promptkit() -> Outcome {
    let transcribed = [
        "Extract a span of text from the medical document to answer the supplied medical question with evidence from the document.",
        "",
        "For example, if you are given the following basic example:",
        "",
        "Question: \"Does the patient have hypertension\"",
        "Document: \"John Smith is a 56 year-old male. He was diagnosed with hypertension on 04-04-22. John is at risk for stroke.\"",
        "",
        "You should answer with:",
        "",
        "{\"start_idx\": 35, \"span_text\": \"He was diagnosed with hypertension on 04-04-22.\"}",
        "",
        "Answer questions using only text found in the document. REMEMBER: Return only properly formatted JSON. Do not return any additional text. You are an expert in producing perfectly formatted JSON responses and no additional text. You always remember to close bracks when outputting JSON. You are an expert in medicine and medical document review. You provide perfect answers to questions about patients by carefully reading their medical documents and using your clinical knowledge.",
        "",
    ]
    .join("\n");
    let question = "Does the patient have asthma in their medical history?";
    let document = "Uses albuterol as needed.";
    let zero = promptkit::render_prompt(&[], question, document);
    let expected = format!("{transcribed}\nQuestion: \"{question}\"\nDocument: \"{document}\"\n");
    ensure!(zero.as_bytes() == expected.as_bytes(), "zero-shot prompt differs from the transcribed template");

    // Every example renders to a block of fixed size:
    //   "\nQuestion: \"" 12 + "Q" 1 + "\"\nDocument: \"" 13 + window L + "\"\n" 2
    //   + {"start_idx":0,"span_text":"x"} 31 + "\n" 1
    // and the query block "\nQuestion: \"Q\"\nDocument: \"D\"\n" is 29.
    let window = 40;
    let block = 12 + 1 + 13 + window + 2 + 31 + 1;
    let query = 29;
    let few = text::char_len(promptkit::FEW_SHOT_TEMPLATE);
    let suffix = text::char_len(promptkit::FEW_SHOT_SUFFIX);
    let zero_len = text::char_len(promptkit::ZERO_SHOT_TEMPLATE);
    let total = |k: usize| if k == 0 { zero_len + query } else { few + k * block + 1 + suffix + 1 + query };
    let examples: Vec<FewShotExample> = (0..10)
        .map(|i| FewShotExample {
            example_id: format!("e{i}"),
            question: "Q".into(),
            answer_text: "x".into(),
            answer_start: 0,
            context_window: "w".repeat(window),
            window_radius: 0,
        })
        .collect();
    let chars = |max_units| PromptBudget { max_units, unit: BudgetUnit::Chars, chars_per_token: 4.0 };
    let tokens = |max_units| PromptBudget { max_units, unit: BudgetUnit::ApproxTokens, chars_per_token: 4.0 };
    let trims: [(PromptBudget, Option<usize>); 7] = [
        (chars(total(10)), Some(10)),
        (chars(total(7)), Some(7)),
        (chars(total(8) - 1), Some(7)),
        (chars(total(1)), Some(1)),
        (chars(total(1) - 1), Some(0)),
        (tokens(total(4).div_ceil(4)), Some(4)),
        (chars(total(0) - 1), None),
    ];
    for (i, (budget, want)) in trims.iter().enumerate() {
        match (promptkit::assemble_prompt("q", &examples, "Q", "D", budget), want) {
            (Ok(p), Some(k)) => {
                ensure!(p.manifest.retained_examples.len() == *k, "trim fixture {i}: kept {}, expected {k}", p.manifest.retained_examples.len());
                ensure!(text::char_len(&p.prompt) == total(*k), "trim fixture {i}: length {}", text::char_len(&p.prompt));
                ensure!(p.manifest.retained_examples == examples[..*k].iter().map(|e| e.example_id.clone()).collect::<Vec<_>>(), "trim fixture {i}: wrong examples kept");
            }
            (Err(xaiqa::Error::QueryExceedsBudget { .. }), None) => {}
            (got, want) => return Err(format!("trim fixture {i}: got {:?}, expected {want:?}", got.map(|p| p.manifest))),
        }
    }

    let opts = ParseOptions::default();
    let recover = ParseOptions { recover_unclosed: true };
    let cases: [(&str, ParseOptions, Option<(&str, Option<i64>)>); 20] = [
        (r#"{"start_idx": 35, "span_text": "He was diagnosed."}"#, opts, Some(("He was diagnosed.", Some(35)))),
        (r#"  {"start_idx":0,"span_text":"fever"}  "#, opts, Some(("fever", Some(0)))),
        (r#"Here is the answer: {"start_idx": 4, "span_text": "cough"}"#, opts, Some(("cough", Some(4)))),
        (r#"{"start_idx": 4, "span_text": "cough"} Hope this helps."#, opts, Some(("cough", Some(4)))),
        ("Sure!\n{\"start_idx\": 12, \"span_text\": \"rash\"}\nLet me know.", opts, Some(("rash", Some(12)))),
        ("```json\n{\"start_idx\": 7, \"span_text\": \"on warfarin\"}\n```", opts, Some(("on warfarin", Some(7)))),
        (r#"{"note": {"x": 1}, "start_idx": 2, "span_text": "edema"}"#, opts, Some(("edema", Some(2)))),
        (r#"{"meta": 1} then {"start_idx": 9, "span_text": "nausea"}"#, opts, Some(("nausea", Some(9)))),
        (r#"{"span_text": "no index"}"#, opts, Some(("no index", None))),
        (r#"{"start_idx": null, "span_text": "null index"}"#, opts, Some(("null index", None))),
        (r#"{"start_idx": 35.0, "span_text": "float index"}"#, opts, Some(("float index", Some(35)))),
        (r#"{"start_idx": 1, "span_text": "says \"no\" to meds"}"#, opts, Some(("says \"no\" to meds", Some(1)))),
        (r#"{"start_idx": 3, "span_text": "fièvre à 39°C"}"#, opts, Some(("fièvre à 39°C", Some(3)))),
        ("{\n  \"start_idx\": 5,\n  \"span_text\": \"multi\\nline\"\n}", opts, Some(("multi\nline", Some(5)))),
        (r#"{"start_idx": 1, "span_text": "first"} {"start_idx": 2, "span_text": "second"}"#, opts, Some(("first", Some(1)))),
        (r#"{"start_idx": 0, "span_text": ""}"#, opts, Some(("", Some(0)))),
        ("I cannot find the answer in the document.", opts, None),
        ("", opts, None),
        (r#"{"start_idx": 8, "span_text": "unclosed""#, opts, None),
        (r#"{"start_idx": 8, "span_text": "unclosed""#, recover, Some(("unclosed", Some(8)))),
    ];
    for (i, (raw, o, want)) in cases.iter().enumerate() {
        let p = promptkit::parse_model_answer("item", raw, *o);
        ensure!(p.item_id == "item", "parse fixture {i}: item id");
        match want {
            Some((span, start)) => {
                ensure!(!p.parse_failed && p.span_text == *span && p.start_idx == *start, "parse fixture {i}: {p:?}");
            }
            None => ensure!(p.parse_failed && p.span_text.is_empty() && p.start_idx.is_none(), "parse fixture {i}: {p:?}"),
        }
    }
    Ok(format!("zero-shot byte-identical, {} trimming fixtures, {} parse fixtures", trims.len(), cases.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 explainer oracle equivalence", ac1_explainer_oracle),
        ("2 planted-signal answer selection", ac2_planted_signal),
        ("3 xaiqa vs cosine divergence", ac3_cosine_divergence),
        ("4 answer post-processing", ac4_postprocess),
        ("5 QA metric fixtures", ac5_metrics),
        ("6 statistics", ac6_statistics),
        ("7 QCLO and Porter stemming", ac7_qclo),
        ("8 prompt assembly and parsing", ac8_promptkit),
        ("9 end-to-end determinism", e2e::run),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

