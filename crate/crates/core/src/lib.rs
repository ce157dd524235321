//! Next-step concept prediction for academic and career trajectories.
//!
//! The pipeline: [`ingest`] parses and filters a corpus, [`predictor`] counts
//! concept co-occurrences and ranks hypotheses, [`evaluator`] scores the
//! rankings with leave-one-out cross-validation, and [`synthgen`] produces
//! seeded synthetic corpora.

pub mod error;
pub mod evaluator;
pub mod ingest;
pub mod json;
pub mod predictor;
pub mod synthgen;
pub mod taxonomy;
pub mod types;

pub use error::CoreError;
pub use evaluator::{EvalError, EvalReport, RankMode, ReorientationFlag, ScoreParams};
pub use ingest::{AliasTable, CorpusStats, IngestError};
pub use predictor::{FrequencyModel, Method, PredictError, RankedPrediction};
pub use synthgen::{GenError, GenParams};
pub use taxonomy::{classify_step, Concept, Taxonomies, Taxonomy};
pub use types::{ConceptId, FieldTag, Skill, Step, StepKind, Trajectory, YearMonth};
