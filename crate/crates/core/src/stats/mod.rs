//! Agreement and classification statistics for validating measurements
//! against expert reference values.

mod classify;
mod fdist;
mod icc;

pub use classify::{confusion, precision_recall_f1, screening_binarize, Averaging, ConfusionMatrix, Scores, Screen};
pub use fdist::{f_cdf, f_quantile};
pub use icc::{icc_single, IccKind, IccResult, RatingTable};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("rating table needs n >= 3 cases and k >= 2 raters (got {n} x {k})")]
    TableShape { n: usize, k: usize },
    #[error("rating table rows have unequal length or non-finite values")]
    RaggedTable,
    #[error("degenerate variance: ICC denominator is zero")]
    DegenerateVariance,
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("label {0} is not among the declared classes")]
    UnknownLabel(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}
