//! Synthetic extractive question-answer pairs from explained multi-label
//! document classifiers, and the tooling to evaluate QA models on them.
//!
//! The pipeline: load a labeled [`corpus`], train or connect a [`classifier`],
//! attribute its predictions to sentences with the masked-sampling
//! [`explainer`], turn the top sentence per (document, label) into a QA pair
//! with the [`generator`], then measure question difficulty ([`hardness`]),
//! build prompts ([`promptkit`]) and score predictions ([`metrics`]).

pub mod classifier;
pub mod corpus;
pub mod embedder;
pub mod error;
pub mod explainer;
pub mod generator;
pub mod hardness;
pub mod jsonl;
pub mod metrics;
pub mod promptkit;
mod remote;
pub mod text;

pub use error::{Error, Result};
