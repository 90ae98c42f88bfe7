//! Client for an out-of-process scorer.
//!
//! Protocol: `GET {endpoint}/labels` returns `{"labels": [...]}`, fixing the
//! column order. `POST {endpoint}/score` with `{"texts": [...]}` returns
//! `{"scores": [[...], ...], "truncated": [...]}`, one row per text.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScoreMatrix, Scorer};
use crate::error::{Error, Result};
use crate::remote;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsHandshake {
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<Vec<f64>>,
    /// Whether the server truncated each input to fit its model.
    #[serde(default)]
    pub truncated: Vec<bool>,
}

#[derive(Debug)]
pub struct RemoteScorer {
    endpoint: String,
    labels: Vec<String>,
    batch_size: usize,
    client: reqwest::blocking::Client,
}

impl RemoteScorer {
    /// Performs the label handshake.
    pub fn connect(endpoint: &str, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("remote scorer batch_size must be positive".into()));
        }
        let client = remote::client(Duration::from_secs(300));
        let hs: LabelsHandshake = remote::get_json(&client, &remote::join(endpoint, "labels"))
            .map_err(|message| Error::Scorer { batch: 0, message: format!("handshake: {message}") })?;
        Ok(Self {
            endpoint: endpoint.to_string(),
            labels: hs.labels,
            batch_size,
            client,
        })
    }

    /// Scores `texts`, also returning the server's per-text truncation flags.
    pub fn score_with_truncation(&self, texts: &[String]) -> Result<(ScoreMatrix, Vec<bool>)> {
        let mut out = ScoreMatrix::empty(self.labels.len());
        let mut truncated = Vec::with_capacity(texts.len());
        let url = remote::join(&self.endpoint, "score");
        for (batch, chunk) in texts.chunks(self.batch_size).enumerate() {
            let fail = |message: String| Error::Scorer { batch, message };
            let resp: ScoreResponse = remote::post_json(&self.client, &url, &ScoreRequest { texts: chunk.to_vec() }).map_err(fail)?;
            if resp.scores.len() != chunk.len() {
                return Err(fail(format!("shape mismatch: {} rows for {} texts", resp.scores.len(), chunk.len())));
            }
            match resp.truncated.len() {
                0 => truncated.extend(std::iter::repeat_n(false, chunk.len())),
                n if n == chunk.len() => truncated.extend(resp.truncated),
                n => return Err(fail(format!("shape mismatch: {n} truncation flags for {} texts", chunk.len()))),
            }
            let m = ScoreMatrix::from_rows(self.labels.len(), resp.scores).map_err(|e| fail(format!("shape mismatch: {e}")))?;
            out.extend(m);
        }
        let n_trunc = truncated.iter().filter(|t| **t).count();
        if n_trunc > 0 {
            log::info!("remote scorer truncated {n_trunc} of {} texts", texts.len());
        }
        Ok((out, truncated))
    }
}

impl Scorer for RemoteScorer {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn score(&self, texts: &[String]) -> Result<ScoreMatrix> {
        self.score_with_truncation(texts).map(|(m, _)| m)
    }
}
