//! Multi-label document scorers and classifier evaluation.
//!
//! Anything implementing [`Scorer`] can drive the explainer: the builtin
//! [`LinearModel`] or a [`RemoteScorer`] talking to a model server.

mod ap;
mod linear;
mod remote;

pub use ap::{average_precision, evaluate, ClassifierMetrics};
pub use linear::{LinearModel, LinearModelParams, TrainConfig, MODEL_SCHEMA_VERSION};
pub use remote::{RemoteScorer, ScoreRequest, ScoreResponse, LabelsHandshake};

use crate::error::{Error, Result};

/// Row-major matrix of label probabilities, one row per input text and one
/// column per label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            values: Vec::new(),
        }
    }

    /// Builds a matrix, checking that every row has `n_cols` finite values in `[0, 1]`.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::InvalidInput(format!(
                    "score row {i} has {} columns, expected {n_cols}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
                return Err(Error::InvalidInput(format!("score row {i} holds {v}, outside [0, 1]")));
            }
            values.extend(row);
        }
        Ok(Self { n_rows, n_cols, values })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(|i| self.row(i))
    }

    /// Appends the rows of `other`, which must have the same width.
    pub fn extend(&mut self, other: ScoreMatrix) {
        assert_eq!(self.n_cols, other.n_cols, "column count mismatch");
        self.n_rows += other.n_rows;
        self.values.extend(other.values);
    }
}

/// A black-box multi-label classifier.
pub trait Scorer: Send + Sync {
    /// Label codes in column order.
    fn labels(&self) -> &[String];

    /// Scores every text; the result has `texts.len()` rows and `labels().len()` columns.
    fn score(&self, texts: &[String]) -> Result<ScoreMatrix>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn labels(&self) -> &[String] {
        (**self).labels()
    }

    fn score(&self, texts: &[String]) -> Result<ScoreMatrix> {
        (**self).score(texts)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn labels(&self) -> &[String] {
        (**self).labels()
    }

    fn score(&self, texts: &[String]) -> Result<ScoreMatrix> {
        (**self).score(texts)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
