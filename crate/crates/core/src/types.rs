//! Domain types shared by every stage of the pipeline.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CoreError;

/// Upper bound on the number of concepts attached to one step.
pub const MAX_CONCEPTS_PER_STEP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Diploma,
    Job,
}

impl StepKind {
    pub const ALL: [StepKind; 2] = [StepKind::Diploma, StepKind::Job];

    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Diploma => "diploma",
            StepKind::Job => "job",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "diploma" => Ok(StepKind::Diploma),
            "job" => Ok(StepKind::Job),
            other => Err(CoreError::UnknownKind(other.to_string())),
        }
    }
}

/// Identity of a concept: its domain and its index inside that domain's taxonomy.
///
/// Labels live in [`crate::Taxonomy`] and never take part in equality, so a
/// renamed concept keeps its identity.
///
/// Serialized as the `kind:index` string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptId {
    pub domain: StepKind,
    pub index: u16,
}

impl ConceptId {
    pub const fn new(domain: StepKind, index: u16) -> Self {
        ConceptId { domain, index }
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.domain, self.index)
    }
}

impl FromStr for ConceptId {
    type Err = CoreError;

    /// Parses `kind:index`, e.g. `job:12`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, index) = s
            .split_once(':')
            .ok_or_else(|| CoreError::InvalidConcept(s.to_string()))?;
        let domain = kind.parse()?;
        let index = index
            .trim()
            .parse()
            .map_err(|_| CoreError::InvalidConcept(s.to_string()))?;
        Ok(ConceptId { domain, index })
    }
}

impl Serialize for ConceptId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConceptId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A normalized field tag such as `internet` or `wind-power`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldTag(String);

impl FieldTag {
    /// Lowercases, trims and collapses internal whitespace. Fails on blank input.
    pub fn new(raw: &str) -> Result<Self, CoreError> {
        let label = raw
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        if label.is_empty() {
            return Err(CoreError::EmptyField);
        }
        Ok(FieldTag(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FieldTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for FieldTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for FieldTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        FieldTag::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// A calendar date at month granularity, with an optional day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
    pub day: Option<u8>,
}

impl YearMonth {
    pub fn new(year: i32, month: u8, day: Option<u8>) -> Result<Self, CoreError> {
        let invalid = || CoreError::InvalidDate(format!("{year:04}-{month:02}"));
        if !(1..=12).contains(&month) {
            return Err(invalid());
        }
        if !(0..=9999).contains(&year) {
            return Err(invalid());
        }
        if let Some(d) = day {
            if !(1..=days_in_month(year, month)).contains(&d) {
                return Err(invalid());
            }
        }
        Ok(YearMonth { year, month, day })
    }

    /// Months since year 0, ignoring the day.
    pub fn month_ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_month_ordinal(ordinal: i64) -> Result<Self, CoreError> {
        let year = ordinal.div_euclid(12);
        let month = ordinal.rem_euclid(12) + 1;
        let year = i32::try_from(year).map_err(|_| CoreError::InvalidDate(ordinal.to_string()))?;
        YearMonth::new(year, month as u8, None)
    }
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        _ => 28,
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)?;
        if let Some(day) = self.day {
            write!(f, "-{day:02}")?;
        }
        Ok(())
    }
}

impl FromStr for YearMonth {
    type Err = CoreError;

    /// Accepts `YYYY-MM` or `YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || CoreError::InvalidDate(s.to_string());
        let mut parts = s.trim().split('-');
        let year = parts.next().ok_or_else(invalid)?;
        let month = parts.next().ok_or_else(invalid)?;
        let day = parts.next();
        if parts.next().is_some() || year.len() != 4 || month.len() != 2 {
            return Err(invalid());
        }
        let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(year) || !all_digits(month) {
            return Err(invalid());
        }
        let day = match day {
            Some(d) if d.len() == 2 && all_digits(d) => Some(d.parse().map_err(|_| invalid())?),
            Some(_) => return Err(invalid()),
            None => None,
        };
        YearMonth::new(
            year.parse().map_err(|_| invalid())?,
            month.parse().map_err(|_| invalid())?,
            day,
        )
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub kind: StepKind,
    pub title: String,
    pub start: YearMonth,
    pub end: Option<YearMonth>,
    pub location: Option<String>,
    pub description: Option<String>,
    pub fields: BTreeSet<FieldTag>,
    /// Ordered by decreasing evidence; see [`crate::classify_step`].
    pub concepts: Vec<ConceptId>,
}

impl Step {
    /// Checks the per-step invariants that do not need a taxonomy.
    pub fn validate(&self) -> Result<(), CoreError> {
        if let Some(end) = self.end {
            if end < self.start {
                return Err(CoreError::EndBeforeStart {
                    start: self.start,
                    end,
                });
            }
        }
        if self.concepts.len() > MAX_CONCEPTS_PER_STEP {
            return Err(CoreError::TooManyConcepts(self.concepts.len()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.concepts {
            if c.domain != self.kind {
                return Err(CoreError::DomainMismatch {
                    expected: self.kind,
                    found: c.domain,
                });
            }
            if !seen.insert(*c) {
                return Err(CoreError::DuplicateConcept(*c));
            }
        }
        Ok(())
    }

    fn order_key(&self) -> (YearMonth, Option<YearMonth>, &str) {
        (self.start, self.end, &self.title)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skill {
    pub label: String,
    pub rating: Option<i64>,
}

/// One anonymous user's ordered sequence of steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub user_id: String,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub skills: Vec<Skill>,
}

impl Trajectory {
    /// Builds a trajectory, sorting steps by start date then `(end, title)`.
    pub fn new(user_id: impl Into<String>, mut steps: Vec<Step>, skills: Vec<Skill>) -> Self {
        steps.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        Trajectory {
            user_id: user_id.into(),
            steps,
            skills,
        }
    }

    pub fn is_ordered(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| w[0].order_key() <= w[1].order_key())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}
