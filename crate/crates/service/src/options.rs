//! The goal question and the paginated concept picker.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use nextstep_core::predictor::rank_pooled;
use nextstep_core::{classify_step, ConceptId, FieldTag, StepKind, Taxonomies, Trajectory};

use crate::error::ApiError;
use crate::state::Snapshot;

/// Concepts shown per page; the rest sit behind "more résumé".
pub const PAGE_SIZE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    FurtherStudies,
    Job,
}

impl Branch {
    pub const ALL: [Branch; 2] = [Branch::FurtherStudies, Branch::Job];

    pub fn target_kind(self) -> StepKind {
        match self {
            Branch::FurtherStudies => StepKind::Diploma,
            Branch::Job => StepKind::Job,
        }
    }
}

/// The step the user is standing on. Concepts win over fields when both are given.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepInput {
    pub kind: StepKind,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub concepts: Vec<String>,
    #[serde(default)]
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsRequest {
    pub current_step: StepInput,
    pub branch: Branch,
    #[serde(default)]
    pub goal: Option<String>,
    #[serde(default)]
    pub page: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRef {
    pub id: ConceptId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub kind: StepKind,
    pub title: Option<String>,
    pub concepts: Vec<ConceptRef>,
}

/// Share of corpus transitions out of matching steps that lead into `branch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchShare {
    pub branch: Branch,
    pub target_kind: StepKind,
    pub transitions: u64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptOption {
    pub id: ConceptId,
    pub label: String,
    /// Ranking score: summed co-occurrence count, or popularity when backed off.
    pub count: u64,
    /// Number of training steps carrying the concept.
    pub popularity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionsPage {
    pub context_step: StepSummary,
    pub branch: Branch,
    pub branches: Vec<BranchShare>,
    pub goal: Option<ConceptRef>,
    pub backed_off: bool,
    pub top_concepts: Vec<ConceptOption>,
    pub more_available: bool,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}

fn concept_ref(taxonomies: &Taxonomies, id: ConceptId) -> ConceptRef {
    ConceptRef {
        id,
        label: taxonomies.label(id).unwrap_or_default().to_string(),
    }
}

fn parse_concept(taxonomies: &Taxonomies, raw: &str) -> Result<ConceptId, ApiError> {
    let id: ConceptId = raw
        .parse()
        .map_err(|e| ApiError::bad_request("invalid_concept", format!("{raw:?}: {e}")))?;
    if !taxonomies.contains(id) {
        return Err(ApiError::bad_request(
            "invalid_concept",
            format!("{id} is not in the {} taxonomy", id.domain),
        ));
    }
    Ok(id)
}

/// Concepts of the current step, validated against its kind.
pub fn step_concepts(taxonomies: &Taxonomies, step: &StepInput) -> Result<Vec<ConceptId>, ApiError> {
    let mut out: Vec<ConceptId> = Vec::new();
    for raw in &step.concepts {
        let id = parse_concept(taxonomies, raw)?;
        if id.domain != step.kind {
            return Err(ApiError::bad_request(
                "invalid_concept",
                format!("{id} does not belong to a {} step", step.kind),
            ));
        }
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() && !step.fields.is_empty() {
        let fields = step
            .fields
            .iter()
            .map(|f| FieldTag::new(f))
            .collect::<Result<BTreeSet<_>, _>>()
            .map_err(|e| ApiError::bad_request("invalid_field", e.to_string()))?;
        out = classify_step(&fields, taxonomies.for_kind(step.kind));
    }
    Ok(out)
}

/// Counts, over every step of `kind` sharing a concept with `context` (every
/// step of `kind` when the context is empty), which kind comes next.
pub fn branch_shares(corpus: &[Trajectory], kind: StepKind, context: &[ConceptId]) -> Vec<BranchShare> {
    let mut counts = [0u64; 2];
    for t in corpus {
        for pair in t.steps.windows(2) {
            let here = &pair[0];
            if here.kind != kind {
                continue;
            }
            if !context.is_empty() && !here.concepts.iter().any(|c| context.contains(c)) {
                continue;
            }
            match pair[1].kind {
                StepKind::Diploma => counts[0] += 1,
                StepKind::Job => counts[1] += 1,
            }
        }
    }
    let total = counts[0] + counts[1];
    Branch::ALL
        .iter()
        .zip(counts)
        .map(|(&branch, n)| BranchShare {
            branch,
            target_kind: branch.target_kind(),
            transitions: n,
            share: if total == 0 { 0.0 } else { n as f64 / total as f64 },
        })
        .collect()
}

pub fn options(snapshot: &Snapshot, req: &OptionsRequest) -> Result<OptionsPage, ApiError> {
    let taxonomies = &snapshot.taxonomies;
    let context = step_concepts(taxonomies, &req.current_step)?;
    let goal = req
        .goal
        .as_deref()
        .map(|g| parse_concept(taxonomies, g))
        .transpose()?;
    let trained = snapshot.trained.as_ref().ok_or_else(ApiError::no_model)?;

    let target = req.branch.target_kind();
    let tax = taxonomies.for_kind(target);
    let models = trained.models(target);
    let ranked = match goal {
        None => models.previous.rank(Some(&context), tax),
        Some(g) => rank_pooled(&[(&models.previous, &context), (&models.next, &[g])], tax),
    };

    let total = ranked.hypotheses.len();
    let start = req.page.saturating_mul(PAGE_SIZE).min(total);
    let end = (start + PAGE_SIZE).min(total);
    let top_concepts = ranked.hypotheses[start..end]
        .iter()
        .map(|h| ConceptOption {
            id: h.concept,
            label: tax.label(h.concept).unwrap_or_default().to_string(),
            count: h.score,
            popularity: h.count,
        })
        .collect();

    Ok(OptionsPage {
        context_step: StepSummary {
            kind: req.current_step.kind,
            title: req.current_step.title.clone(),
            concepts: context.iter().map(|&c| concept_ref(taxonomies, c)).collect(),
        },
        branch: req.branch,
        branches: branch_shares(&trained.corpus, req.current_step.kind, &context),
        goal: goal.map(|g| concept_ref(taxonomies, g)),
        backed_off: ranked.backed_off,
        top_concepts,
        more_available: end < total,
        page: req.page,
        page_size: PAGE_SIZE,
        total,
    })
}
