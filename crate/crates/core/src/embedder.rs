//! Sentence embeddings: a deterministic hashed bag-of-words embedder and a
//! client for a remote encoder.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::remote;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v * c).collect())
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

/// Cosine similarity. A zero vector has similarity 0 with everything.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.0.iter().zip(&b.0) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Hashed bag-of-words: every token maps to one signed coordinate, weighted
/// by idf when an idf table is present, and the token vectors are mean-pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinEmbedder {
    dim: usize,
    seed: u64,
    idf: Option<HashMap<String, f64>>,
    unseen_weight: f64,
}

impl BuiltinEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::InvalidConfig(format!("builtin embedder dim must be >= 8, got {dim}")));
        }
        Ok(Self { dim, seed, idf: None, unseen_weight: 1.0 })
    }

    /// Adds smoothed idf weights computed from `texts`. Unseen tokens weigh
    /// as much as the rarest seen token.
    pub fn with_idf<'a>(mut self, texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut n = 0usize;
        for t in texts {
            n += 1;
            let mut toks = tokenize(t);
            toks.sort();
            toks.dedup();
            for tok in toks {
                *df.entry(tok).or_default() += 1;
            }
        }
        let idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        self.unseen_weight = idf.values().copied().fold(1.0, f64::max);
        self.idf = Some(idf);
        self
    }

    fn weight(&self, token: &str) -> f64 {
        match &self.idf {
            None => 1.0,
            Some(idf) => idf.get(token).copied().unwrap_or(self.unseen_weight),
        }
    }

    fn bucket(&self, token: &str) -> (usize, f64) {
        let mut h: u64 = 0xcbf29ce484222325 ^ self.seed.wrapping_mul(0x9e3779b97f4a7c15);
        for b in token.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        // finalizer from splitmix64 so low bits depend on every byte
        h ^= h >> 30;
        h = h.wrapping_mul(0xbf58476d1ce4e5b9);
        h ^= h >> 27;
        h = h.wrapping_mul(0x94d049bb133111eb);
        h ^= h >> 31;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % self.dim as u64) as usize, sign)
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let tokens = tokenize(text);
        let mut v = vec![0.0; self.dim];
        if tokens.is_empty() {
            return EmbeddingVector(v);
        }
        for t in &tokens {
            let (i, sign) = self.bucket(t);
            v[i] += sign * self.weight(t);
        }
        let n = tokens.len() as f64;
        v.iter_mut().for_each(|x| *x /= n);
        EmbeddingVector(v)
    }
}

impl Embedder for BuiltinEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
}

/// Client for `POST {endpoint}/embed`.
#[derive(Debug)]
pub struct RemoteEmbedder {
    endpoint: String,
    dim: usize,
    batch_size: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    /// `dim` is the dimension the server is expected to return.
    pub fn new(endpoint: &str, dim: usize, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("remote embedder batch_size must be positive".into()));
        }
        Ok(Self {
            endpoint: endpoint.to_string(),
            dim,
            batch_size,
            client: remote::client(Duration::from_secs(300)),
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let url = remote::join(&self.endpoint, "embed");
        let mut out = Vec::with_capacity(texts.len());
        for (batch, chunk) in texts.chunks(self.batch_size).enumerate() {
            let fail = |message: String| Error::Embedder { batch, message };
            let resp: EmbedResponse = remote::post_json(&self.client, &url, &EmbedRequest { texts: chunk.to_vec() }).map_err(fail)?;
            if resp.vectors.len() != chunk.len() {
                return Err(fail(format!("shape mismatch: {} vectors for {} texts", resp.vectors.len(), chunk.len())));
            }
            if resp.dim != self.dim || resp.vectors.iter().any(|v| v.len() != self.dim) {
                return Err(fail(format!("shape mismatch: expected dimension {}", self.dim)));
            }
            if resp.vectors.iter().flatten().any(|v| !v.is_finite()) {
                return Err(fail("non-finite vector component".into()));
            }
            out.extend(resp.vectors.into_iter().map(EmbeddingVector));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderProvider {
    #[default]
    BuiltinHashTfidf,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub provider: EmbedderProvider,
    pub dim: usize,
    pub endpoint: Option<String>,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            provider: EmbedderProvider::BuiltinHashTfidf,
            dim: 2048,
            endpoint: None,
            seed: 0,
            batch_size: 64,
        }
    }
}

impl EmbedderConfig {
    /// Builds the configured provider. `idf_texts` feeds the builtin
    /// embedder's idf table and is ignored by the remote provider.
    pub fn build(&self, idf_texts: Option<Vec<&str>>) -> Result<Box<dyn Embedder>> {
        match self.provider {
            EmbedderProvider::BuiltinHashTfidf => {
                let e = BuiltinEmbedder::new(self.dim, self.seed)?;
                Ok(Box::new(match idf_texts {
                    Some(texts) => e.with_idf(texts),
                    None => e,
                }))
            }
            EmbedderProvider::Remote => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::InvalidConfig("remote embedder needs an endpoint".into()))?;
                Ok(Box::new(RemoteEmbedder::new(endpoint, self.dim, self.batch_size)?))
            }
        }
    }
}
