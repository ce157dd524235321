//! Seeded synthetic trajectory corpora.
//!
//! Each user gets a diploma phase followed by a job phase. Along a phase the
//! primary concept is kept with the kind's continuity probability and
//! otherwise redrawn from a Zipf popularity law; with `reorientation_rate` the
//! redraw is uniform instead. The first job is linked to the last diploma
//! through a fixed diploma → job affinity map. A fraction of steps carry an
//! unlisted field so that ingestion has something to drop.
//!
//! Every user draws from its own ChaCha stream, so output depends only on
//! the parameters.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::normalize_key;
use crate::taxonomy::{classify_step, Taxonomies, Taxonomy, DIPLOMA_CONCEPTS, JOB_CONCEPTS};
use crate::types::{ConceptId, FieldTag, Step, StepKind, Trajectory, YearMonth};

/// Field carried by steps that no taxonomy classifies.
pub const UNLISTED_FIELD: &str = "unlisted-activity";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub seed: u64,
    pub n_users: usize,
    pub diploma_concepts: usize,
    pub job_concepts: usize,
    /// Mean number of steps per user before filtering.
    pub mean_steps: f64,
    pub continuity_job: f64,
    pub continuity_diploma: f64,
    pub reorientation_rate: f64,
    /// Zipf exponent of concept popularity.
    pub concept_popularity: f64,
    /// Expected share of a user's steps that are diplomas.
    pub diploma_share: f64,
    /// Probability that the first job follows the last diploma's affinity.
    pub transition_affinity: f64,
    /// Probability that a job step carries a second concept. Diplomas carry one.
    pub second_concept_rate: f64,
    /// Probability that a step is emitted with an unlisted field.
    pub unclassified_rate: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 0,
            n_users: 7500,
            diploma_concepts: DIPLOMA_CONCEPTS,
            job_concepts: JOB_CONCEPTS,
            mean_steps: 6.9,
            continuity_job: 0.75,
            continuity_diploma: 0.55,
            reorientation_rate: 0.1,
            concept_popularity: 1.0,
            diploma_share: 0.42,
            transition_affinity: 0.9,
            second_concept_rate: 0.35,
            unclassified_rate: 0.18,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let fail = |m: String| Err(GenError::InvalidParams(m));
        for (name, p) in [
            ("continuity_job", self.continuity_job),
            ("continuity_diploma", self.continuity_diploma),
            ("reorientation_rate", self.reorientation_rate),
            ("diploma_share", self.diploma_share),
            ("transition_affinity", self.transition_affinity),
            ("second_concept_rate", self.second_concept_rate),
            ("unclassified_rate", self.unclassified_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must be a probability, got {p}"));
            }
        }
        if self.n_users < 1 {
            return fail("n_users must be at least 1".into());
        }
        for (name, n) in [
            ("diploma_concepts", self.diploma_concepts),
            ("job_concepts", self.job_concepts),
        ] {
            if n < 1 || n > u16::MAX as usize {
                return fail(format!("{name} must be in 1..=65535, got {n}"));
            }
        }
        if !(self.mean_steps >= 3.0 && self.mean_steps.is_finite()) {
            return fail(format!("mean_steps must be at least 3, got {}", self.mean_steps));
        }
        if !(self.concept_popularity >= 0.0 && self.concept_popularity.is_finite()) {
            return fail("concept_popularity must be a non-negative exponent".into());
        }
        Ok(())
    }
}

/// The taxonomies a corpus generated with `params` is classified against.
pub fn synthetic_taxonomies(params: &GenParams) -> Result<Taxonomies, GenError> {
    params.validate()?;
    let build = |kind, n| Taxonomy::generic(kind, n).map_err(|e| GenError::InvalidParams(e.to_string()));
    Ok(Taxonomies {
        diploma: build(StepKind::Diploma, params.diploma_concepts)?,
        job: build(StepKind::Job, params.job_concepts)?,
    })
}

/// Job concept most related to each diploma concept.
fn affinity_map(diplomas: usize, jobs: usize) -> Vec<u16> {
    if diplomas == DIPLOMA_CONCEPTS && jobs == JOB_CONCEPTS {
        return vec![14, 0, 1, 11, 24, 43, 5, 15, 7, 31, 13, 26, 4, 6, 30, 17, 19];
    }
    (0..diplomas).map(|i| (i * jobs / diplomas) as u16).collect()
}

const DIPLOMA_LEVELS: &[&str] = &[
    "high school diploma",
    "bachelor",
    "master",
    "postgraduate certificate",
    "doctorate",
];

struct Domain<'a> {
    taxonomy: &'a Taxonomy,
    zipf: WeightedIndex<f64>,
    continuity: f64,
}

impl Domain<'_> {
    fn kind(&self) -> StepKind {
        self.taxonomy.domain()
    }

    fn zipf_draw(&self, rng: &mut ChaCha8Rng) -> u16 {
        self.zipf.sample(rng) as u16
    }

    fn uniform_draw(&self, rng: &mut ChaCha8Rng) -> u16 {
        rng.random_range(0..self.taxonomy.len()) as u16
    }
}

struct Generator<'a> {
    params: &'a GenParams,
    diploma: Domain<'a>,
    job: Domain<'a>,
    affinity: Vec<u16>,
    step_count: Poisson<f64>,
}

impl Generator<'_> {
    fn next_concept(&self, domain: &Domain, prev: Option<u16>, rng: &mut ChaCha8Rng) -> u16 {
        if rng.random_bool(self.params.reorientation_rate) {
            return domain.uniform_draw(rng);
        }
        match prev {
            Some(p) if rng.random_bool(domain.continuity) => p,
            _ => domain.zipf_draw(rng),
        }
    }

    fn user(&self, index: usize) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(index as u64);

        let extra = self.step_count.sample(&mut rng) as usize;
        let n = 3 + extra;
        let diplomas = Binomial::new(n as u64, self.params.diploma_share)
            .expect("share validated")
            .sample(&mut rng) as usize;
        let diplomas = diplomas.clamp(1, n - 1);

        let start_year = rng.random_range(1975..=2000);
        let mut month = YearMonth::new(start_year, 9, None)
            .expect("valid date")
            .month_ordinal();

        let mut steps = Vec::with_capacity(n);
        let mut prev: Option<u16> = None;
        let mut last_diploma: Option<u16> = None;
        for i in 0..n {
            let domain = if i < diplomas { &self.diploma } else { &self.job };
            let primary = if i == diplomas {
                let linked = last_diploma
                    .filter(|_| rng.random_bool(self.params.transition_affinity))
                    .map(|d| self.affinity[d as usize]);
                match linked {
                    Some(j) if !rng.random_bool(self.params.reorientation_rate) => j,
                    _ => self.next_concept(domain, None, &mut rng),
                }
            } else {
                self.next_concept(domain, prev, &mut rng)
            };
            prev = Some(primary);
            if domain.kind() == StepKind::Diploma {
                last_diploma = Some(primary);
            }

            let mut concepts = vec![primary];
            if domain.kind() == StepKind::Job && rng.random_bool(self.params.second_concept_rate) {
                let second = domain.zipf_draw(&mut rng);
                if second != primary {
                    concepts.push(second);
                }
            }
            let unlisted = rng.random_bool(self.params.unclassified_rate);

            let duration: i64 = match domain.kind() {
                StepKind::Diploma => rng.random_range(10..=36),
                StepKind::Job => rng.random_range(6..=60),
            };
            let gap: i64 = rng.random_range(0..=3);
            let start = YearMonth::from_month_ordinal(month).expect("dates stay in range");
            let end = if i + 1 == n {
                None
            } else {
                Some(YearMonth::from_month_ordinal(month + duration).expect("dates stay in range"))
            };
            month += duration + gap;

            steps.push(self.step(domain, i, &concepts, unlisted, start, end));
        }
        Trajectory::new(format!("u{index:06}"), steps, Vec::new())
    }

    fn step(
        &self,
        domain: &Domain,
        position: usize,
        concepts: &[u16],
        unlisted: bool,
        start: YearMonth,
        end: Option<YearMonth>,
    ) -> Step {
        let kind = domain.kind();
        let primary = ConceptId::new(kind, concepts[0]);
        let label = domain.taxonomy.label(primary).expect("drawn from taxonomy");
        let raw_title = if unlisted {
            match kind {
                StepKind::Diploma => "unlisted course".to_string(),
                StepKind::Job => "unlisted activity".to_string(),
            }
        } else {
            match kind {
                StepKind::Diploma => {
                    let level = DIPLOMA_LEVELS[position.min(DIPLOMA_LEVELS.len() - 1)];
                    format!("{level} in {label}")
                }
                StepKind::Job => format!("{label} specialist"),
            }
        };
        let fields: BTreeSet<FieldTag> = if unlisted {
            BTreeSet::from([FieldTag::new(UNLISTED_FIELD).expect("non-empty")])
        } else {
            concepts
                .iter()
                .filter_map(|&c| domain.taxonomy.primary_field(ConceptId::new(kind, c)))
                .collect()
        };
        let concepts = classify_step(&fields, domain.taxonomy);
        Step {
            kind,
            title: normalize_key(&raw_title),
            start,
            end,
            location: None,
            description: None,
            fields,
            concepts,
        }
    }
}

fn zipf_weights(n: usize, exponent: f64) -> WeightedIndex<f64> {
    let weights = (1..=n).map(|rank| (rank as f64).powf(-exponent));
    WeightedIndex::new(weights).expect("positive weights")
}

/// Generates `params.n_users` trajectories classified against
/// [`synthetic_taxonomies`]. Unlisted steps carry no concepts.
pub fn generate(params: &GenParams) -> Result<Vec<Trajectory>, GenError> {
    let taxonomies = synthetic_taxonomies(params)?;
    let gen = Generator {
        params,
        diploma: Domain {
            taxonomy: &taxonomies.diploma,
            zipf: zipf_weights(params.diploma_concepts, params.concept_popularity),
            continuity: params.continuity_diploma,
        },
        job: Domain {
            taxonomy: &taxonomies.job,
            zipf: zipf_weights(params.job_concepts, params.concept_popularity),
            continuity: params.continuity_job,
        },
        affinity: affinity_map(params.diploma_concepts, params.job_concepts),
        step_count: Poisson::new((params.mean_steps - 3.0).max(1e-9))
            .map_err(|e| GenError::InvalidParams(e.to_string()))?,
    };
    Ok((0..params.n_users).map(|i| gen.user(i)).collect())
}
