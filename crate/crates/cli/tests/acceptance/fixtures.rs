//! Synthetic corpora with known answers.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xaiqa::corpus::{Corpus, Document, Label, LabelAssignment, LabelVocabulary, SegmenterConfig};

/// Sentences that mention no drug, no condition and no word of the default
/// question template.
pub const FILLERS: [&str; 20] = [
    "Vitals were within normal limits.",
    "Ambulating independently on ward.",
    "Tolerating a regular diet.",
    "No acute distress noted.",
    "Sleeping well overnight.",
    "Pain controlled with acetaminophen.",
    "Family visited this afternoon.",
    "Skin intact without lesions.",
    "Lungs clear to auscultation.",
    "Abdomen soft and nontender.",
    "Discharge planning is underway.",
    "Will follow up with primary care.",
    "Labs reviewed with care team.",
    "Denies headache or dizziness.",
    "Physical therapy consulted.",
    "Wound dressing changed.",
    "Afebrile for two days.",
    "Heart rate regular.",
    "Encouraged incentive spirometry.",
    "Oriented to person, place and time.",
];

/// (code, description, drug) for every planted label.
pub const LABELS: [(&str, &str, &str); 5] = [
    ("E03", "hypothyroidism", "levothyroxine"),
    ("E11", "diabetes", "metformin"),
    ("J45", "asthma", "albuterol"),
    ("I48", "atrial fibrillation", "warfarin"),
    ("I10", "hypertension", "lisinopril"),
];

const DRUG_TEMPLATES: [&str; 3] = ["Started {} at last visit.", "Continues {} without side effects.", "Refilled {} today."];

pub fn drug_sentence(drug: &str, variant: usize) -> String {
    DRUG_TEMPLATES[variant % DRUG_TEMPLATES.len()].replace("{}", drug)
}

/// The sentence stating a condition verbatim, as a question would phrase it.
pub fn verbatim_sentence(description: &str) -> String {
    let mut chars = description.chars();
    let first = chars.next().map(|c| c.to_uppercase().collect::<String>()).unwrap_or_default();
    format!("{first}{} was noted.", chars.as_str())
}

pub struct Planted {
    pub corpus: Corpus,
    /// (doc_id, code, drug sentence, verbatim sentence if present)
    pub positives: Vec<(String, String, String, Option<String>)>,
}

fn vocabulary() -> LabelVocabulary {
    LabelVocabulary::new(
        LABELS.iter().map(|(c, d, _)| Label { code: c.to_string(), description: d.to_string() }).collect(),
    )
    .unwrap()
}

/// `n_docs` documents, each with one or two positive labels. Every positive
/// label contributes a drug sentence; with `verbatim`, it also contributes
/// the verbatim condition sentence, which additionally appears in about half
/// of the documents where the label is negative.
pub fn planted_corpus(n_docs: usize, verbatim: bool, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents = Vec::new();
    let mut assignments = Vec::new();
    let mut positives = Vec::new();
    for d in 0..n_docs {
        let doc_id = format!("doc{d:03}");
        let n_pos = rng.random_range(1..=2);
        let mut idx: Vec<usize> = (0..LABELS.len()).collect();
        idx.shuffle(&mut rng);
        let pos: BTreeSet<usize> = idx[..n_pos].iter().copied().collect();
        let n_fill = rng.random_range(4..=6);
        let mut sentences: Vec<String> = FILLERS.choose_multiple(&mut rng, n_fill).map(|s| s.to_string()).collect();
        let mut planted = Vec::new();
        for (l, (code, description, drug)) in LABELS.iter().enumerate() {
            if pos.contains(&l) {
                let drug_s = drug_sentence(drug, rng.random_range(0..3));
                let at = rng.random_range(0..=sentences.len());
                sentences.insert(at, drug_s.clone());
                let verb = verbatim.then(|| verbatim_sentence(description));
                if let Some(v) = &verb {
                    let at = rng.random_range(0..=sentences.len());
                    sentences.insert(at, v.clone());
                }
                planted.push((doc_id.clone(), code.to_string(), drug_s, verb));
            } else if verbatim && rng.random_bool(0.5) {
                let at = rng.random_range(0..=sentences.len());
                sentences.insert(at, verbatim_sentence(description));
            }
        }
        positives.extend(planted);
        documents.push(Document::new(doc_id.clone(), sentences.join(" "), &SegmenterConfig::default()));
        assignments.push(LabelAssignment {
            doc_id,
            positive_codes: pos.iter().map(|&l| LABELS[l].0.to_string()).collect(),
        });
    }
    Planted { corpus: Corpus::new(documents, vocabulary(), assignments).unwrap(), positives }
}
