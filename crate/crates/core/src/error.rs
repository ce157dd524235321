use thiserror::Error;

use crate::types::{ConceptId, StepKind, YearMonth};

/// Errors raised while building or validating core domain values.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error("unknown step kind `{0}` (expected `diploma` or `job`)")]
    UnknownKind(String),
    #[error("invalid concept reference `{0}` (expected `kind:index`)")]
    InvalidConcept(String),
    #[error("field tag is empty")]
    EmptyField,
    #[error("invalid date `{0}` (expected YYYY-MM or YYYY-MM-DD)")]
    InvalidDate(String),
    #[error("step ends ({end}) before it starts ({start})")]
    EndBeforeStart { start: YearMonth, end: YearMonth },
    #[error("step carries {0} concepts, the maximum is 4")]
    TooManyConcepts(usize),
    #[error("concept {0} listed twice on one step")]
    DuplicateConcept(ConceptId),
    #[error("concept from the {found} taxonomy used where {expected} was expected")]
    DomainMismatch { expected: StepKind, found: StepKind },
    #[error("concept {0} is not part of the taxonomy")]
    UnknownConcept(ConceptId),
    #[error("taxonomy: {0}")]
    Taxonomy(String),
    #[error("taxonomy csv, line {line}: {message}")]
    TaxonomyCsv { line: u64, message: String },
}
