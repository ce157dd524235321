//! Frequency model and next-step concept ranking.
//!
//! A model counts, for one target step kind and one conditioning method, how
//! often each hypothesis concept `H` occurs (`marginal`) and how often it
//! co-occurs with each context concept `C` (`joint`). Hypotheses are ranked
//! by `Σ_C joint[H, C]`; `P(C)` is the same for every hypothesis so it never
//! affects the order and is not computed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::taxonomy::Taxonomy;
use crate::types::{ConceptId, StepKind, Trajectory};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredictError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("step index {index} is not predictable in a trajectory of {len} steps")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("removing step {index} of user `{user_id}` would make a count negative; the step was not part of training")]
    Underflow { user_id: String, index: usize },
    #[error("concept {0} is outside the model's taxonomy")]
    UnknownConcept(ConceptId),
    #[error("model predicts {model} steps, got a {requested} step or taxonomy")]
    KindMismatch { model: StepKind, requested: StepKind },
    #[error("invalid model dump: {0}")]
    Dump(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

/// Which other step supplies the context concepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// No context; every user gets the same popularity list.
    #[serde(rename = "baseline")]
    Baseline,
    /// Most recent diploma strictly before the step.
    #[serde(rename = "last-diploma")]
    LastDiploma,
    /// Highest diploma obtained so far. Diplomas are ranked by chronological
    /// order, so this is the latest diploma before the step.
    #[serde(rename = "highest-diploma")]
    HighestDiploma,
    /// The immediately preceding step.
    #[serde(rename = "previous")]
    PreviousStep,
    /// First job strictly after the step (simulated user intent).
    #[serde(rename = "first-job")]
    FirstJobAfter,
    /// The immediately following step (simulated user intent).
    #[serde(rename = "next")]
    NextStepIntent,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Baseline,
        Method::LastDiploma,
        Method::HighestDiploma,
        Method::PreviousStep,
        Method::FirstJobAfter,
        Method::NextStepIntent,
    ];

    /// The methods reported side by side for a target kind, baseline first.
    pub fn report_set(kind: StepKind) -> [Method; 4] {
        match kind {
            StepKind::Diploma => [
                Method::Baseline,
                Method::FirstJobAfter,
                Method::PreviousStep,
                Method::HighestDiploma,
            ],
            StepKind::Job => [
                Method::Baseline,
                Method::LastDiploma,
                Method::PreviousStep,
                Method::NextStepIntent,
            ],
        }
    }

    /// The command-line token for this method.
    pub fn token(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::LastDiploma => "last-diploma",
            Method::HighestDiploma => "highest-diploma",
            Method::PreviousStep => "previous",
            Method::FirstJobAfter => "first-job",
            Method::NextStepIntent => "next",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "Baseline",
            Method::LastDiploma => "LastDiploma",
            Method::HighestDiploma => "HighestDiploma",
            Method::PreviousStep => "PreviousStep",
            Method::FirstJobAfter => "FirstJobAfter",
            Method::NextStepIntent => "NextStepIntent",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = PredictError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.token() == s || m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| PredictError::UnknownMethod(s.to_string()))
    }
}

/// `true` when `index` is neither the first nor the last step.
pub fn is_predictable_index(trajectory: &Trajectory, index: usize) -> bool {
    index >= 1 && index + 1 < trajectory.steps.len()
}

fn dedup(concepts: &[ConceptId]) -> Vec<ConceptId> {
    let mut seen = BTreeSet::new();
    concepts.iter().copied().filter(|c| seen.insert(*c)).collect()
}

/// Context concepts for predicting step `index` under `method`.
///
/// `Ok(None)` means the step the method relies on does not exist.
pub fn extract_context(
    trajectory: &Trajectory,
    index: usize,
    method: Method,
) -> Result<Option<Vec<ConceptId>>, PredictError> {
    if !is_predictable_index(trajectory, index) {
        return Err(PredictError::IndexOutOfRange {
            index,
            len: trajectory.steps.len(),
        });
    }
    let steps = &trajectory.steps;
    let source = match method {
        Method::Baseline => return Ok(Some(Vec::new())),
        Method::PreviousStep => Some(&steps[index - 1]),
        Method::NextStepIntent => Some(&steps[index + 1]),
        Method::LastDiploma | Method::HighestDiploma => steps[..index]
            .iter()
            .rev()
            .find(|s| s.kind == StepKind::Diploma),
        Method::FirstJobAfter => steps[index + 1..].iter().find(|s| s.kind == StepKind::Job),
    };
    Ok(source.map(|s| dedup(&s.concepts)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub concept: ConceptId,
    /// Summed joint count, or the marginal count when backed off.
    pub score: u64,
    /// Marginal count of the concept.
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub method: Method,
    pub context_concepts: Vec<ConceptId>,
    pub backed_off: bool,
    pub hypotheses: Vec<Hypothesis>,
}

impl RankedPrediction {
    /// 1-based rank of `concept`, if present.
    pub fn position(&self, concept: ConceptId) -> Option<usize> {
        self.hypotheses
            .iter()
            .position(|h| h.concept == concept)
            .map(|p| p + 1)
    }

    pub fn concepts(&self) -> impl Iterator<Item = ConceptId> + '_ {
        self.hypotheses.iter().map(|h| h.concept)
    }
}

/// Co-occurrence counts for one target kind under one method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyModel {
    target_kind: StepKind,
    method: Method,
    marginal: Vec<u64>,
    joint: BTreeMap<ConceptId, Vec<u64>>,
    total_steps: u64,
    concept_occurrences: u64,
}

impl FrequencyModel {
    /// A model with every count at zero, sized for `taxonomy`.
    pub fn empty(taxonomy: &Taxonomy, method: Method) -> Self {
        FrequencyModel {
            target_kind: taxonomy.domain(),
            method,
            marginal: vec![0; taxonomy.len()],
            joint: BTreeMap::new(),
            total_steps: 0,
            concept_occurrences: 0,
        }
    }

    /// Counts every predictable step of the taxonomy's kind in `corpus`.
    ///
    /// Steps whose context is undefined under `method` still count towards
    /// the marginals.
    pub fn train(
        corpus: &[Trajectory],
        taxonomy: &Taxonomy,
        method: Method,
    ) -> Result<Self, PredictError> {
        if corpus.is_empty() {
            return Err(PredictError::EmptyCorpus);
        }
        let mut model = FrequencyModel::empty(taxonomy, method);
        for t in corpus {
            model.add_trajectory(t)?;
        }
        Ok(model)
    }

    pub fn add_trajectory(&mut self, trajectory: &Trajectory) -> Result<(), PredictError> {
        for index in 0..trajectory.steps.len() {
            if self.is_training_step(trajectory, index) {
                self.add_step(trajectory, index)?;
            }
        }
        Ok(())
    }

    /// Whether step `index` contributes to this model.
    pub fn is_training_step(&self, trajectory: &Trajectory, index: usize) -> bool {
        is_predictable_index(trajectory, index) && trajectory.steps[index].kind == self.target_kind
    }

    fn contribution(
        &self,
        trajectory: &Trajectory,
        index: usize,
    ) -> Result<(Vec<ConceptId>, Vec<ConceptId>), PredictError> {
        let step = trajectory
            .steps
            .get(index)
            .ok_or(PredictError::IndexOutOfRange {
                index,
                len: trajectory.steps.len(),
            })?;
        if step.kind != self.target_kind {
            return Err(PredictError::KindMismatch {
                model: self.target_kind,
                requested: step.kind,
            });
        }
        let hypotheses = dedup(&step.concepts);
        for h in &hypotheses {
            if h.domain != self.target_kind || h.index as usize >= self.marginal.len() {
                return Err(PredictError::UnknownConcept(*h));
            }
        }
        let context = match self.method {
            Method::Baseline => Vec::new(),
            m => extract_context(trajectory, index, m)?.unwrap_or_default(),
        };
        Ok((hypotheses, context))
    }

    pub fn add_step(&mut self, trajectory: &Trajectory, index: usize) -> Result<(), PredictError> {
        let (hypotheses, context) = self.contribution(trajectory, index)?;
        let width = self.marginal.len();
        for h in &hypotheses {
            let h = h.index as usize;
            self.marginal[h] += 1;
            for c in &context {
                self.joint.entry(*c).or_insert_with(|| vec![0; width])[h] += 1;
            }
        }
        self.total_steps += 1;
        self.concept_occurrences += hypotheses.len() as u64;
        Ok(())
    }

    /// Undoes [`FrequencyModel::add_step`]. Leaves the model untouched on error.
    pub fn remove_step(
        &mut self,
        trajectory: &Trajectory,
        index: usize,
    ) -> Result<(), PredictError> {
        let (hypotheses, context) = self.contribution(trajectory, index)?;
        let underflow = || PredictError::Underflow {
            user_id: trajectory.user_id.clone(),
            index,
        };
        if self.total_steps == 0 {
            return Err(underflow());
        }
        for h in &hypotheses {
            let h = h.index as usize;
            if self.marginal[h] == 0 {
                return Err(underflow());
            }
            for c in &context {
                match self.joint.get(c) {
                    Some(row) if row[h] > 0 => {}
                    _ => return Err(underflow()),
                }
            }
        }
        for h in &hypotheses {
            let h = h.index as usize;
            self.marginal[h] -= 1;
            for c in &context {
                if let Some(row) = self.joint.get_mut(c) {
                    row[h] -= 1;
                }
            }
        }
        for c in &context {
            if self.joint.get(c).is_some_and(|row| row.iter().all(|&n| n == 0)) {
                self.joint.remove(c);
            }
        }
        self.total_steps -= 1;
        self.concept_occurrences -= hypotheses.len() as u64;
        Ok(())
    }

    pub fn target_kind(&self) -> StepKind {
        self.target_kind
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn concept_occurrences(&self) -> u64 {
        self.concept_occurrences
    }

    pub fn marginal(&self, h: ConceptId) -> u64 {
        if h.domain != self.target_kind {
            return 0;
        }
        self.marginal.get(h.index as usize).copied().unwrap_or(0)
    }

    pub fn joint(&self, h: ConceptId, c: ConceptId) -> u64 {
        if h.domain != self.target_kind {
            return 0;
        }
        self.joint
            .get(&c)
            .and_then(|row| row.get(h.index as usize))
            .copied()
            .unwrap_or(0)
    }

    /// Non-zero joint counts as `(H, C, count)`.
    pub fn joint_entries(&self) -> impl Iterator<Item = (ConceptId, ConceptId, u64)> + '_ {
        self.joint.iter().flat_map(move |(c, row)| {
            row.iter().enumerate().filter(|(_, n)| **n > 0).map(move |(h, n)| {
                (ConceptId::new(self.target_kind, h as u16), *c, *n)
            })
        })
    }

    /// Number of hypothesis concepts the model was sized for.
    pub fn width(&self) -> usize {
        self.marginal.len()
    }

    fn check_taxonomy(&self, taxonomy: &Taxonomy) {
        assert_eq!(
            taxonomy.domain(),
            self.target_kind,
            "taxonomy domain does not match the model"
        );
        assert_eq!(
            taxonomy.len(),
            self.marginal.len(),
            "taxonomy size does not match the model"
        );
    }

    /// Adds `Σ_C joint[·, C]` into `scores`; returns whether anything was positive.
    fn accumulate(&self, context: &[ConceptId], scores: &mut [u64]) -> bool {
        let mut any = false;
        for c in dedup(context) {
            if let Some(row) = self.joint.get(&c) {
                for (s, n) in scores.iter_mut().zip(row) {
                    *s += n;
                    any |= *n > 0;
                }
            }
        }
        any
    }

    /// Ranks every concept of `taxonomy` given the context concepts.
    ///
    /// Falls back to marginal counts when the context is absent, empty or has
    /// no co-occurrence with any hypothesis.
    ///
    /// Panics if `taxonomy` is not the one the model was trained for.
    pub fn rank(&self, context: Option<&[ConceptId]>, taxonomy: &Taxonomy) -> RankedPrediction {
        self.check_taxonomy(taxonomy);
        let context = context.map(dedup).unwrap_or_default();
        if self.method == Method::Baseline {
            return self.finish(self.marginal.clone(), context, false);
        }
        let mut scores = vec![0; self.marginal.len()];
        if self.accumulate(&context, &mut scores) {
            self.finish(scores, context, false)
        } else {
            self.finish(self.marginal.clone(), context, true)
        }
    }

    fn finish(&self, scores: Vec<u64>, context: Vec<ConceptId>, backed_off: bool) -> RankedPrediction {
        let mut hypotheses: Vec<Hypothesis> = scores
            .into_iter()
            .enumerate()
            .map(|(i, score)| Hypothesis {
                concept: ConceptId::new(self.target_kind, i as u16),
                score,
                count: self.marginal[i],
            })
            .collect();
        hypotheses.sort_by(compare_hypotheses);
        RankedPrediction {
            method: self.method,
            context_concepts: context,
            backed_off,
            hypotheses,
        }
    }

    /// Ranks step `index` with its own contribution removed, then restores it.
    pub fn leave_one_out_rank(
        &mut self,
        trajectory: &Trajectory,
        index: usize,
        taxonomy: &Taxonomy,
    ) -> Result<RankedPrediction, PredictError> {
        let context = extract_context(trajectory, index, self.method)?;
        self.remove_step(trajectory, index)?;
        let prediction = self.rank(context.as_deref(), taxonomy);
        self.add_step(trajectory, index)?;
        Ok(prediction)
    }

    /// Canonical JSON dump: equal models give byte-equal output.
    pub fn to_dump(&self) -> Value {
        let marginal: serde_json::Map<String, Value> = self
            .marginal
            .iter()
            .enumerate()
            .map(|(i, n)| (i.to_string(), json!(n)))
            .collect();
        let mut joint: BTreeMap<&str, Vec<[u64; 3]>> =
            StepKind::ALL.iter().map(|k| (k.as_str(), Vec::new())).collect();
        for (h, c, n) in self.joint_entries() {
            joint
                .get_mut(c.domain.as_str())
                .expect("both domains present")
                .push([h.index as u64, c.index as u64, n]);
        }
        for entries in joint.values_mut() {
            entries.sort_unstable();
        }
        json!({
            "target_kind": self.target_kind,
            "method": self.method,
            "total_steps": self.total_steps,
            "concept_occurrences": self.concept_occurrences,
            "marginal": marginal,
            "joint": joint,
        })
    }

    pub fn to_dump_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_dump()).expect("dump serializes");
        s.push('\n');
        s
    }

    /// Parses and validates a dump produced by [`FrequencyModel::to_dump`].
    pub fn from_dump_str(text: &str) -> Result<Self, PredictError> {
        let bad = |m: &str| PredictError::Dump(m.to_string());
        let dump: DumpRepr = serde_json::from_str(text).map_err(|e| PredictError::Dump(e.to_string()))?;
        let width = dump.marginal.len();
        if width == 0 || width > u16::MAX as usize {
            return Err(bad("marginal must list between 1 and 65535 concepts"));
        }
        let mut marginal = vec![0u64; width];
        for (key, n) in &dump.marginal {
            let i: usize = key.parse().map_err(|_| bad("marginal keys must be concept indices"))?;
            if i >= width {
                return Err(bad("marginal indices must be dense from 0"));
            }
            marginal[i] = *n;
        }
        let mut joint: BTreeMap<ConceptId, Vec<u64>> = BTreeMap::new();
        for (domain, entries) in &dump.joint {
            for &[h, c, n] in entries {
                let h = usize::try_from(h).ok().filter(|h| *h < width).ok_or_else(|| bad("joint hypothesis index out of range"))?;
                let c = u16::try_from(c).map_err(|_| bad("joint context index out of range"))?;
                if n == 0 {
                    return Err(bad("joint counts must be positive"));
                }
                let row = joint
                    .entry(ConceptId::new(*domain, c))
                    .or_insert_with(|| vec![0; width]);
                if row[h] != 0 {
                    return Err(bad("duplicate joint entry"));
                }
                row[h] = n;
            }
        }
        if dump.method == Method::Baseline && !joint.is_empty() {
            return Err(bad("baseline models carry no joint counts"));
        }
        let sum = marginal
            .iter()
            .try_fold(0u64, |acc, n| acc.checked_add(*n))
            .ok_or_else(|| bad("marginal counts overflow"))?;
        if sum != dump.concept_occurrences {
            return Err(bad("marginal counts do not add up to concept_occurrences"));
        }
        Ok(FrequencyModel {
            target_kind: dump.target_kind,
            method: dump.method,
            marginal,
            joint,
            total_steps: dump.total_steps,
            concept_occurrences: dump.concept_occurrences,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpRepr {
    target_kind: StepKind,
    method: Method,
    total_steps: u64,
    concept_occurrences: u64,
    marginal: BTreeMap<String, u64>,
    joint: BTreeMap<StepKind, Vec<[u64; 3]>>,
}

/// Score descending, then marginal descending, then concept index ascending.
pub fn compare_hypotheses(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .cmp(&a.score)
        .then(b.count.cmp(&a.count))
        .then(a.concept.index.cmp(&b.concept.index))
}

/// Ranks with evidence pooled from several models over the same target steps.
///
/// Each part contributes `Σ_C joint[·, C]` from its model for its own context.
/// All models must share the target kind and marginals (any method trained on
/// the same corpus does). The result reports the method of the last part.
pub fn rank_pooled(
    parts: &[(&FrequencyModel, &[ConceptId])],
    taxonomy: &Taxonomy,
) -> RankedPrediction {
    let (first, _) = parts.first().expect("at least one model");
    first.check_taxonomy(taxonomy);
    let mut scores = vec![0; first.marginal.len()];
    let mut any = false;
    let mut context = Vec::new();
    let mut method = first.method;
    for (model, ctx) in parts {
        model.check_taxonomy(taxonomy);
        assert_eq!(model.marginal, first.marginal, "pooled models disagree on marginals");
        if model.method != Method::Baseline {
            any |= model.accumulate(ctx, &mut scores);
        }
        context.extend_from_slice(ctx);
        method = model.method;
    }
    let context = dedup(&context);
    let baseline_only = parts.iter().all(|(m, _)| m.method == Method::Baseline);
    let mut out = if any {
        first.finish(scores, context, false)
    } else {
        first.finish(first.marginal.clone(), context, !baseline_only)
    };
    out.method = method;
    out
}
