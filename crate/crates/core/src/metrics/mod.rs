//! QA metrics, statistics and annotation handling.

pub mod annotations;
pub mod qa;
pub mod report;
pub mod stats;

pub use annotations::{combine_annotations, counts_by_method, AnnotationRecord, CombinedAnnotation, MethodCounts};
pub use qa::{exact_match, normalize_answer, rouge2_recall, score_against, token_f1, SpanScores, ROUGE_TOKENIZER};
pub use report::{evaluate, score_items, EvalReport, GoldAnswer, GoldItem, ItemScore, Prediction, StratumAggregate};
pub use stats::{
    agreement, bootstrap_ci, cohen_kappa, ln_gamma, regularized_incomplete_beta, student_t_two_sided, welch_t_test,
    BootstrapConfig, ConfidenceInterval, WelchResult,
};
