
use rayon::prelude::*;

use super::{argmax_first, AnswerSpan, Method, QAPair};
use crate::corpus::{segment, Corpus, SegmenterConfig};
use crate::embedder::{cosine, Embedder};
use crate::error::{Error, Result};

/// Narrows each answer to the extended-mode segment of its original sentence
/// that is most cosine-similar to the question (lowest index on ties).
///
/// Offsets stay exact document offsets; the method becomes `xaiqa_pp` and the
/// score is kept.
pub fn postprocess(pairs: &[QAPair], corpus: &Corpus, embedder: &dyn Embedder) -> Result<Vec<QAPair>> {
    let index = corpus.doc_index();
    let cfg = SegmenterConfig::extended();
    pairs
        .par_iter()
        .map(|pair| {
            let doc = index
                .get(pair.doc_id.as_str())
                .map(|&i| &corpus.documents[i])
                .ok_or_else(|| Error::UnknownDocument(pair.doc_id.clone()))?;
            let (start, end) = (pair.answer.start, pair.answer.end);
            let original = doc.slice(start, end).filter(|s| *s == pair.answer.text).ok_or_else(|| Error::CorpusDrift {
                doc_id: pair.doc_id.clone(),
                start,
                end,
            })?;
            let segments = segment(original, &cfg);
            let answer = if segments.len() <= 1 {
                segments
                    .first()
                    .map(|s| AnswerSpan { start: start + s.start, end: start + s.end, text: s.text.clone() })
                    .unwrap_or_else(|| pair.answer.clone())
            } else {
                let mut texts = Vec::with_capacity(segments.len() + 1);
                texts.push(pair.question.clone());
                texts.extend(segments.iter().map(|s| s.text.clone()));
                let vecs = embedder.embed(&texts)?;
                let sims = vecs[1..].iter().map(|v| cosine(&vecs[0], v)).collect::<Result<Vec<f64>>>()?;
                let best = &segments[argmax_first(&sims).unwrap_or(0)];
                AnswerSpan { start: start + best.start, end: start + best.end, text: best.text.clone() }
            };
            Ok(QAPair { answer, method: Method::XaiqaPp, ..pair.clone() })
        })
        .collect()
}
