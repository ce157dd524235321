//! Leave-one-out evaluation with the bucketed reciprocal-rank score.
//!
//! Every predictable step of the target kind whose context is defined is held
//! out in turn: its counts are removed from the model, the remaining counts
//! rank the taxonomy, and the rank of the true concept is scored. Ranks are
//! grouped into packs of `pack_size` propositions (one screen). Inside a pack
//! the score is `(1/p)^alpha` for within-pack position `p`; each further pack
//! multiplies it by `pack_penalty`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictor::{extract_context, FrequencyModel, Method, PredictError, RankedPrediction};
use crate::taxonomy::Taxonomy;
use crate::types::{ConceptId, StepKind, Trajectory};

/// z-value of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("rank must be at least 1, got {0}")]
    InvalidRank(usize),
    #[error("invalid score parameters: {0}")]
    InvalidParams(String),
    #[error("true concept set is empty")]
    EmptyTruth,
    #[error("concept {0} is not in the ranked taxonomy")]
    ConceptNotInTaxonomy(ConceptId),
    #[error("no step of kind {kind} can be evaluated with method {method}")]
    NoEvaluableSteps { kind: StepKind, method: Method },
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// How the within-pack factor picks its rank.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    /// `(1/p)^alpha` with `p` restarting at 1 in every pack.
    #[default]
    WithinPack,
    /// `(1/r)^alpha` with the global rank `r`.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub alpha: f64,
    pub pack_size: usize,
    pub pack_penalty: f64,
    #[serde(default)]
    pub rank_mode: RankMode,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            alpha: 0.2,
            pack_size: 6,
            pack_penalty: 0.5,
            rank_mode: RankMode::WithinPack,
        }
    }
}

impl ScoreParams {
    /// Checks ranges, and for within-pack ranking that the first item of a
    /// pack scores strictly below the last item of the previous one.
    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid = |m: String| Err(EvalError::InvalidParams(m));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid(format!("alpha must be in (0, 1], got {}", self.alpha));
        }
        if self.pack_size < 1 {
            return invalid("pack_size must be at least 1".into());
        }
        if !(self.pack_penalty > 0.0 && self.pack_penalty <= 1.0) {
            return invalid(format!("pack_penalty must be in (0, 1], got {}", self.pack_penalty));
        }
        if self.rank_mode == RankMode::WithinPack {
            let last_in_pack = (self.pack_size as f64).powf(-self.alpha);
            if self.pack_penalty >= last_in_pack {
                return invalid(format!(
                    "pack_penalty {} must be below pack_size^-alpha = {last_in_pack:.6}",
                    self.pack_penalty
                ));
            }
        }
        Ok(())
    }
}

/// Score in `(0, 1]` for the true concept found at 1-based `rank`.
pub fn step_score(rank: usize, params: &ScoreParams) -> Result<f64, EvalError> {
    if rank < 1 {
        return Err(EvalError::InvalidRank(rank));
    }
    let pack = (rank - 1) / params.pack_size;
    let r = match params.rank_mode {
        RankMode::WithinPack => (rank - 1) % params.pack_size + 1,
        RankMode::Global => rank,
    };
    let pack = i32::try_from(pack).unwrap_or(i32::MAX);
    Ok(params.pack_penalty.powi(pack) * (1.0 / r as f64).powf(params.alpha))
}

/// 1-based rank of the best-placed true concept.
pub fn rank_of_truth(prediction: &RankedPrediction, truth: &[ConceptId]) -> Result<usize, EvalError> {
    if truth.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    let mut best = usize::MAX;
    for c in truth {
        let pos = prediction
            .position(*c)
            .ok_or(EvalError::ConceptNotInTaxonomy(*c))?;
        best = best.min(pos);
    }
    Ok(best)
}

/// Result of holding out one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub user_id: String,
    pub step_index: usize,
    pub rank: usize,
    pub score: f64,
}

/// `(mean, low, high)` of a normal-approximation 95% interval on the mean.
///
/// Uses the sample standard deviation; a single value gives a zero-width interval.
pub fn confidence_interval(scores: &[f64]) -> (f64, f64, f64) {
    let n = scores.len();
    if n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, mean, mean);
    }
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half = Z_95 * var.sqrt() / (n as f64).sqrt();
    (mean, mean - half, mean + half)
}

/// Every `(trajectory, step)` pair evaluated under `method`, in corpus order.
pub fn evaluable_steps(
    corpus: &[Trajectory],
    target_kind: StepKind,
    method: Method,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (ti, t) in corpus.iter().enumerate() {
        for si in 1..t.steps.len().saturating_sub(1) {
            if t.steps[si].kind != target_kind {
                continue;
            }
            if matches!(extract_context(t, si, method), Ok(Some(_))) {
                out.push((ti, si));
            }
        }
    }
    out
}

/// Holds out each evaluable step and records its rank and score.
///
/// Work is split over `jobs` threads, each with its own model copy. The
/// outcomes are sorted by `(user_id, step_index)`, so they do not depend on
/// `jobs` or on the order of `corpus`.
pub fn evaluate_steps(
    corpus: &[Trajectory],
    taxonomy: &Taxonomy,
    method: Method,
    params: &ScoreParams,
    jobs: usize,
) -> Result<Vec<StepOutcome>, EvalError> {
    params.validate()?;
    let kind = taxonomy.domain();
    let targets = evaluable_steps(corpus, kind, method);
    if targets.is_empty() {
        return Err(EvalError::NoEvaluableSteps { kind, method });
    }
    let model = FrequencyModel::train(corpus, taxonomy, method)?;
    let jobs = jobs.clamp(1, targets.len());
    let chunk = targets.len().div_ceil(jobs);

    let run = |mut model: FrequencyModel, work: &[(usize, usize)]| -> Result<Vec<StepOutcome>, EvalError> {
        let mut out = Vec::with_capacity(work.len());
        for &(ti, si) in work {
            let t = &corpus[ti];
            let prediction = model.leave_one_out_rank(t, si, taxonomy)?;
            let rank = rank_of_truth(&prediction, &t.steps[si].concepts)?;
            out.push(StepOutcome {
                user_id: t.user_id.clone(),
                step_index: si,
                rank,
                score: step_score(rank, params)?,
            });
        }
        Ok(out)
    };

    let mut outcomes = if jobs == 1 {
        run(model, &targets)?
    } else {
        let parts: Vec<Result<Vec<StepOutcome>, EvalError>> = thread::scope(|scope| {
            let handles: Vec<_> = targets
                .chunks(chunk)
                .map(|work| {
                    let model = model.clone();
                    scope.spawn(move || run(model, work))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        });
        let mut all = Vec::with_capacity(targets.len());
        for part in parts {
            all.extend(part?);
        }
        all
    };
    outcomes.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.step_index.cmp(&b.step_index))
    });
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub target_kind: StepKind,
    pub n_evaluated: usize,
    pub mean_rank: f64,
    pub mrr: f64,
    pub ci95: [f64; 2],
    pub ci_method: String,
    /// Rank `r` → number of held-out steps whose truth ranked in `[r, r+1)`.
    pub histogram: BTreeMap<usize, usize>,
    pub params: ScoreParams,
    pub taxonomy_size: usize,
}

impl EvalReport {
    /// Aggregates outcomes. Panics on an empty slice.
    pub fn from_outcomes(
        method: Method,
        target_kind: StepKind,
        taxonomy_size: usize,
        params: ScoreParams,
        outcomes: &[StepOutcome],
    ) -> Self {
        assert!(!outcomes.is_empty(), "no outcomes to summarize");
        let n = outcomes.len();
        let scores: Vec<f64> = outcomes.iter().map(|o| o.score).collect();
        let (mrr, low, high) = confidence_interval(&scores);
        let mean_rank = outcomes.iter().map(|o| o.rank as f64).sum::<f64>() / n as f64;
        let mut histogram = BTreeMap::new();
        for o in outcomes {
            *histogram.entry(o.rank).or_insert(0) += 1;
        }
        EvalReport {
            method,
            target_kind,
            n_evaluated: n,
            mean_rank,
            mrr,
            ci95: [low, high],
            ci_method: "normal-approximation, z = 1.96, sample stddev".into(),
            histogram,
            params,
            taxonomy_size,
        }
    }

    pub fn to_json(&self) -> String {
        crate::json::to_canonical_string(self).expect("report serializes")
    }

    /// `Method | MR | MRR | [lo, hi]`.
    pub fn table_row(&self) -> String {
        format!(
            "{} | {:.2} | {:.3} | [{:.3}, {:.3}]",
            self.method, self.mean_rank, self.mrr, self.ci95[0], self.ci95[1]
        )
    }

    /// `rank_bin,count` lines with a header.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("rank_bin,count\n");
        for (rank, count) in &self.histogram {
            let _ = writeln!(out, "{rank},{count}");
        }
        out
    }
}

/// Renders reports as a `Method | MR | MRR | CI` table.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = String::from("Method | MR | MRR | CI\n");
    for r in reports {
        out.push_str(&r.table_row());
        out.push('\n');
    }
    out
}

/// Leave-one-out evaluation of `method` on the steps of `taxonomy`'s kind.
pub fn evaluate(
    corpus: &[Trajectory],
    taxonomy: &Taxonomy,
    method: Method,
    params: &ScoreParams,
    jobs: usize,
) -> Result<EvalReport, EvalError> {
    let outcomes = evaluate_steps(corpus, taxonomy, method, params, jobs)?;
    Ok(EvalReport::from_outcomes(
        method,
        taxonomy.domain(),
        taxonomy.len(),
        *params,
        &outcomes,
    ))
}

/// A held-out step whose true concept ranked beyond `threshold`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorientationFlag {
    pub user_id: String,
    pub step_index: usize,
    pub rank_of_truth: usize,
    pub threshold: usize,
}

pub fn flag_outcomes(outcomes: &[StepOutcome], threshold: usize) -> Vec<ReorientationFlag> {
    outcomes
        .iter()
        .filter(|o| o.rank > threshold)
        .map(|o| ReorientationFlag {
            user_id: o.user_id.clone(),
            step_index: o.step_index,
            rank_of_truth: o.rank,
            threshold,
        })
        .collect()
}

/// Steps the model ranks worse than `threshold`; by default pass `params.pack_size`.
pub fn detect_reorientations(
    corpus: &[Trajectory],
    taxonomy: &Taxonomy,
    method: Method,
    params: &ScoreParams,
    threshold: usize,
    jobs: usize,
) -> Result<Vec<ReorientationFlag>, EvalError> {
    let outcomes = evaluate_steps(corpus, taxonomy, method, params, jobs)?;
    Ok(flag_outcomes(&outcomes, threshold))
}
