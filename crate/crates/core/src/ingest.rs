//! Corpus loading: title normalization, step classification and profile filtering.
//!
//! Two filters run in a fixed order. Steps whose fields map to no concept are
//! dropped first; profiles left with fewer than [`MIN_STEPS`] steps are then
//! dropped whole.

use std::collections::{BTreeMap, HashSet};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CoreError;
use crate::taxonomy::{classify_step, Taxonomies};
use crate::types::{FieldTag, Skill, Step, StepKind, Trajectory, YearMonth, MAX_CONCEPTS_PER_STEP};

/// Profiles with fewer surviving steps than this are removed.
pub const MIN_STEPS: usize = 3;

/// Characters deleted during key normalization.
const STRIPPED: &[char] = &['.', ',', ';', ':', '/', '(', ')', '\'', '"', '-'];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: user `{user_id}` appears more than once")]
    DuplicateUser { line: u64, user_id: String },
    #[error("line {line}: title `{title}` is not in the alias table and has no kind")]
    MissingKind { line: u64, title: String },
    #[error("alias file, line {line}: {message}")]
    Alias { line: u64, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Lowercases, deletes `.,;:/()'"-` and collapses whitespace.
pub fn normalize_key(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let stripped: String = lowered.chars().filter(|c| !STRIPPED.contains(c)).collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct AliasEntry {
    canonical: String,
    kind: StepKind,
}

/// Exact-match table from normalized keys to canonical titles.
///
/// Every canonical title is also reachable through its own normalized key, so
/// normalizing a canonical title returns it unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    entries: BTreeMap<String, AliasEntry>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        key: &str,
        canonical: &str,
        kind: StepKind,
    ) -> Result<(), String> {
        let canonical = canonical.trim();
        if canonical.is_empty() {
            return Err("empty canonical title".into());
        }
        let entry = AliasEntry {
            canonical: canonical.to_string(),
            kind,
        };
        for k in [normalize_key(key), normalize_key(canonical)] {
            if k.is_empty() {
                return Err(format!("alias key `{key}` is empty after normalization"));
            }
            match self.entries.get(&k) {
                Some(existing) if *existing != entry => {
                    return Err(format!(
                        "key `{k}` maps to both `{}` and `{}`",
                        existing.canonical, entry.canonical
                    ))
                }
                Some(_) => {}
                None => {
                    self.entries.insert(k, entry.clone());
                }
            }
        }
        Ok(())
    }

    /// Parses the `key,canonical,kind` CSV format (header required).
    pub fn from_csv_str(text: &str) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let alias_err = |line: u64, message: String| IngestError::Alias { line, message };
        let headers = reader
            .headers()
            .map_err(|e| alias_err(1, e.to_string()))?
            .clone();
        if headers.iter().ne(["key", "canonical", "kind"]) {
            return Err(alias_err(1, "expected header `key,canonical,kind`".into()));
        }
        let mut table = AliasTable::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                alias_err(e.position().map_or(0, |p| p.line()), e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(alias_err(line, format!("expected 3 columns, found {}", record.len())));
            }
            let kind: StepKind = record[2]
                .parse()
                .map_err(|e: CoreError| alias_err(line, e.to_string()))?;
            table
                .insert(&record[0], &record[1], kind)
                .map_err(|m| alias_err(line, m))?;
        }
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical title and kind for a raw title.
    ///
    /// A hit returns the table's canonical title and kind. A miss returns the
    /// normalized key with `kind_hint`, or `None` when there is no hint.
    pub fn normalize_title(
        &self,
        raw: &str,
        kind_hint: Option<StepKind>,
    ) -> Option<(String, StepKind)> {
        let key = normalize_key(raw);
        match self.entries.get(&key) {
            Some(entry) => Some((entry.canonical.clone(), entry.kind)),
            None => kind_hint.map(|kind| (key, kind)),
        }
    }
}

/// One step as it appears in a corpus file, before normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStep {
    #[serde(rename = "kind", default)]
    pub kind_hint: Option<String>,
    #[serde(rename = "title")]
    pub raw_title: String,
    pub start: YearMonth,
    #[serde(default)]
    pub end: Option<YearMonth>,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(rename = "fields", default)]
    pub raw_fields: Vec<String>,
    #[serde(default)]
    pub description: Option<String>,
}

/// One corpus line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTrajectory {
    pub user_id: String,
    pub steps: Vec<RawStep>,
    #[serde(default)]
    pub skills: Vec<Skill>,
}

/// Parses one JSONL record and checks per-step invariants that need no taxonomy.
pub fn parse_record(line: &str) -> Result<RawTrajectory, String> {
    let record: RawTrajectory = serde_json::from_str(line).map_err(|e| e.to_string())?;
    for (i, step) in record.steps.iter().enumerate() {
        if step.raw_title.trim().is_empty() {
            return Err(format!("step {i}: empty title"));
        }
        if let Some(end) = step.end {
            if end < step.start {
                return Err(format!("step {i}: ends {end} before it starts {}", step.start));
            }
        }
    }
    Ok(record)
}

/// Parses a JSONL corpus. Blank lines are skipped.
///
/// Returns each record with its 1-based line number.
pub fn parse_corpus_str(text: &str) -> Result<Vec<(u64, RawTrajectory)>, IngestError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line).map_err(|message| IngestError::Parse {
            line: line_no,
            message,
        })?;
        if !seen.insert(record.user_id.clone()) {
            return Err(IngestError::DuplicateUser {
                line: line_no,
                user_id: record.user_id,
            });
        }
        out.push((line_no, record));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub users: usize,
    pub steps: usize,
    pub diploma_steps: usize,
    pub job_steps: usize,
    pub mean_steps_per_user: f64,
    pub dropped_profiles: usize,
    pub dropped_steps: usize,
}

/// Counts over surviving trajectories. Drop counters are zero.
pub fn corpus_stats(corpus: &[Trajectory]) -> CorpusStats {
    let mut stats = CorpusStats {
        users: corpus.len(),
        ..CorpusStats::default()
    };
    for step in corpus.iter().flat_map(|t| &t.steps) {
        stats.steps += 1;
        match step.kind {
            StepKind::Diploma => stats.diploma_steps += 1,
            StepKind::Job => stats.job_steps += 1,
        }
    }
    if stats.users > 0 {
        stats.mean_steps_per_user = stats.steps as f64 / stats.users as f64;
    }
    stats
}

/// Applies the two filtering rules to classified trajectories.
pub fn filter_trajectories(trajectories: Vec<Trajectory>) -> (Vec<Trajectory>, CorpusStats) {
    let mut kept = Vec::with_capacity(trajectories.len());
    let mut dropped_steps = 0;
    let mut dropped_profiles = 0;
    for mut t in trajectories {
        let before = t.steps.len();
        t.steps.retain(|s| !s.concepts.is_empty());
        dropped_steps += before - t.steps.len();
        if t.steps.len() < MIN_STEPS {
            dropped_profiles += 1;
        } else {
            kept.push(t);
        }
    }
    let mut stats = corpus_stats(&kept);
    stats.dropped_steps = dropped_steps;
    stats.dropped_profiles = dropped_profiles;
    (kept, stats)
}

fn build_step(
    line: u64,
    raw: RawStep,
    aliases: &AliasTable,
    taxonomies: &Taxonomies,
) -> Result<Step, IngestError> {
    let hint = match raw.kind_hint.as_deref() {
        Some(k) => Some(k.parse::<StepKind>().map_err(|e| IngestError::Parse {
            line,
            message: e.to_string(),
        })?),
        None => None,
    };
    let (title, kind) =
        aliases
            .normalize_title(&raw.raw_title, hint)
            .ok_or_else(|| IngestError::MissingKind {
                line,
                title: raw.raw_title.clone(),
            })?;
    let fields = raw
        .raw_fields
        .iter()
        .filter(|f| !f.trim().is_empty())
        .map(|f| FieldTag::new(f))
        .collect::<Result<_, _>>()?;
    let mut concepts = classify_step(&fields, taxonomies.for_kind(kind));
    concepts.truncate(MAX_CONCEPTS_PER_STEP);
    let step = Step {
        kind,
        title,
        start: raw.start,
        end: raw.end,
        location: raw.location,
        description: raw.description,
        fields,
        concepts,
    };
    step.validate().map_err(|e| IngestError::Parse {
        line,
        message: e.to_string(),
    })?;
    Ok(step)
}

/// Normalizes, classifies and filters parsed records.
pub fn build_corpus(
    records: Vec<(u64, RawTrajectory)>,
    aliases: &AliasTable,
    taxonomies: &Taxonomies,
) -> Result<(Vec<Trajectory>, CorpusStats), IngestError> {
    let mut trajectories = Vec::with_capacity(records.len());
    for (line, record) in records {
        let steps = record
            .steps
            .into_iter()
            .map(|raw| build_step(line, raw, aliases, taxonomies))
            .collect::<Result<Vec<_>, _>>()?;
        trajectories.push(Trajectory::new(record.user_id, steps, record.skills));
    }
    Ok(filter_trajectories(trajectories))
}

pub fn load_corpus_str(
    text: &str,
    aliases: &AliasTable,
    taxonomies: &Taxonomies,
) -> Result<(Vec<Trajectory>, CorpusStats), IngestError> {
    build_corpus(parse_corpus_str(text)?, aliases, taxonomies)
}

pub fn load_corpus(
    path: &Path,
    aliases: &AliasTable,
    taxonomies: &Taxonomies,
) -> Result<(Vec<Trajectory>, CorpusStats), IngestError> {
    load_corpus_str(&std::fs::read_to_string(path)?, aliases, taxonomies)
}

fn to_raw(t: &Trajectory) -> RawTrajectory {
    RawTrajectory {
        user_id: t.user_id.clone(),
        steps: t
            .steps
            .iter()
            .map(|s| RawStep {
                kind_hint: Some(s.kind.as_str().to_string()),
                raw_title: s.title.clone(),
                start: s.start,
                end: s.end,
                location: s.location.clone(),
                raw_fields: s.fields.iter().map(|f| f.as_str().to_string()).collect(),
                description: s.description.clone(),
            })
            .collect(),
        skills: t.skills.clone(),
    }
}

/// Serializes trajectories as one JSON record per line.
pub fn write_corpus_jsonl<W: Write>(corpus: &[Trajectory], mut out: W) -> io::Result<()> {
    for t in corpus {
        serde_json::to_writer(&mut out, &to_raw(t))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
