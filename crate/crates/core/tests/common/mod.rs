//! Shared test helpers: random corpora and a from-scratch ranking oracle.
//!
//! The oracle deliberately shares no code with `predictor`: it re-derives
//! contexts, recounts co-occurrences in hash maps, and sorts with its own key.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use nextstep_core::{ConceptId, Method, Step, StepKind, Taxonomy, Trajectory, YearMonth};
use proptest::prelude::*;

pub const DIPLOMAS: usize = 4;
pub const JOBS: usize = 5;

pub fn taxonomy(kind: StepKind) -> Taxonomy {
    match kind {
        StepKind::Diploma => Taxonomy::generic(kind, DIPLOMAS).unwrap(),
        StepKind::Job => Taxonomy::generic(kind, JOBS).unwrap(),
    }
}

pub fn step(kind: StepKind, month: i64, concepts: Vec<ConceptId>) -> Step {
    Step {
        kind,
        title: format!("{kind} {month}"),
        start: YearMonth::from_month_ordinal(24_000 + month).unwrap(),
        end: None,
        location: None,
        description: None,
        fields: BTreeSet::new(),
        concepts,
    }
}

fn arb_step() -> impl Strategy<Value = (StepKind, Vec<u16>)> {
    prop_oneof![Just(StepKind::Diploma), Just(StepKind::Job)].prop_flat_map(|kind| {
        let n = match kind {
            StepKind::Diploma => DIPLOMAS,
            StepKind::Job => JOBS,
        } as u16;
        (
            Just(kind),
            prop::collection::btree_set(0..n, 1..=2).prop_map(|s| s.into_iter().collect()),
        )
    })
}

fn arb_trajectory(id: usize) -> impl Strategy<Value = Trajectory> {
    prop::collection::vec(arb_step(), 3..=7).prop_map(move |steps| {
        let steps = steps
            .into_iter()
            .enumerate()
            .map(|(i, (kind, concepts))| {
                let concepts = concepts.into_iter().map(|c| ConceptId::new(kind, c)).collect();
                step(kind, i as i64 * 12, concepts)
            })
            .collect();
        Trajectory::new(format!("user-{id:02}"), steps, vec![])
    })
}

/// Corpora of `users` random trajectories over the small test taxonomies.
pub fn arb_corpus(users: usize) -> impl Strategy<Value = Vec<Trajectory>> {
    (0..users).map(arb_trajectory).collect::<Vec<_>>()
}

pub fn arb_method() -> impl Strategy<Value = Method> {
    prop::sample::select(Method::ALL.to_vec())
}

pub fn arb_kind() -> impl Strategy<Value = StepKind> {
    prop_oneof![Just(StepKind::Diploma), Just(StepKind::Job)]
}

/// Context concepts derived by a direct reading of each method's definition.
pub fn naive_context(t: &Trajectory, i: usize, method: Method) -> Option<Vec<ConceptId>> {
    let concepts_of = |s: &Step| {
        let mut out: Vec<ConceptId> = Vec::new();
        for c in &s.concepts {
            if !out.contains(c) {
                out.push(*c);
            }
        }
        out
    };
    match method {
        Method::Baseline => Some(vec![]),
        Method::PreviousStep => Some(concepts_of(&t.steps[i - 1])),
        Method::NextStepIntent => Some(concepts_of(&t.steps[i + 1])),
        Method::LastDiploma | Method::HighestDiploma => {
            let mut found = None;
            for s in &t.steps[..i] {
                if s.kind == StepKind::Diploma {
                    found = Some(concepts_of(s));
                }
            }
            found
        }
        Method::FirstJobAfter => {
            for s in &t.steps[i + 1..] {
                if s.kind == StepKind::Job {
                    return Some(concepts_of(s));
                }
            }
            None
        }
    }
}

/// Counts for `method`, skipping the `(user index, step index)` in `exclude`.
pub struct NaiveCounts {
    pub marginal: HashMap<u16, u64>,
    pub joint: HashMap<(u16, ConceptId), u64>,
}

pub fn naive_counts(
    corpus: &[Trajectory],
    kind: StepKind,
    method: Method,
    exclude: Option<(usize, usize)>,
) -> NaiveCounts {
    let mut marginal = HashMap::new();
    let mut joint = HashMap::new();
    for (ti, t) in corpus.iter().enumerate() {
        let n = t.steps.len();
        for i in 0..n {
            if i == 0 || i == n - 1 || t.steps[i].kind != kind || exclude == Some((ti, i)) {
                continue;
            }
            let hyps: BTreeSet<u16> = t.steps[i].concepts.iter().map(|c| c.index).collect();
            let ctx = if method == Method::Baseline {
                vec![]
            } else {
                naive_context(t, i, method).unwrap_or_default()
            };
            for h in hyps {
                *marginal.entry(h).or_insert(0) += 1;
                for c in &ctx {
                    *joint.entry((h, *c)).or_insert(0) += 1;
                }
            }
        }
    }
    NaiveCounts { marginal, joint }
}

/// Ranking by enumeration: score every concept, then sort by
/// `(-score, -marginal, index)`.
pub fn naive_rank(
    counts: &NaiveCounts,
    size: usize,
    method: Method,
    context: Option<&[ConceptId]>,
) -> (Vec<u16>, bool) {
    let ctx: BTreeSet<ConceptId> = context.unwrap_or(&[]).iter().copied().collect();
    let marginal = |h: u16| counts.marginal.get(&h).copied().unwrap_or(0);
    let joint_score = |h: u16| -> u64 {
        ctx.iter()
            .map(|c| counts.joint.get(&(h, *c)).copied().unwrap_or(0))
            .sum()
    };
    let use_joint = method != Method::Baseline && (0..size as u16).any(|h| joint_score(h) > 0);
    let backed_off = method != Method::Baseline && !use_joint;
    let mut rows: Vec<(i64, i64, u16)> = (0..size as u16)
        .map(|h| {
            let score = if use_joint { joint_score(h) } else { marginal(h) };
            (-(score as i64), -(marginal(h) as i64), h)
        })
        .collect();
    rows.sort();
    (rows.into_iter().map(|r| r.2).collect(), backed_off)
}
