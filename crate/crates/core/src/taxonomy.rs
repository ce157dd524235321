//! Field → concept taxonomies and step classification.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::types::{ConceptId, FieldTag, StepKind};

/// Number of diploma concepts in the canonical taxonomy.
pub const DIPLOMA_CONCEPTS: usize = 17;
/// Number of job concepts in the canonical taxonomy.
pub const JOB_CONCEPTS: usize = 47;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub label: String,
}

/// Concepts of one domain plus the mapping from field tags onto them.
///
/// Concept indices are dense: the concept at position `i` has index `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyRepr")]
pub struct Taxonomy {
    domain: StepKind,
    concepts: Vec<Concept>,
    field_map: BTreeMap<FieldTag, BTreeSet<ConceptId>>,
}

#[derive(Deserialize)]
struct TaxonomyRepr {
    domain: StepKind,
    concepts: Vec<Concept>,
    field_map: BTreeMap<FieldTag, BTreeSet<ConceptId>>,
}

impl TryFrom<TaxonomyRepr> for Taxonomy {
    type Error = CoreError;

    fn try_from(repr: TaxonomyRepr) -> Result<Self, Self::Error> {
        let labels = repr.concepts.into_iter().map(|c| (c.id, c.label));
        Taxonomy::new(repr.domain, labels, repr.field_map)
    }
}

impl Taxonomy {
    /// Validates and builds a taxonomy.
    pub fn new(
        domain: StepKind,
        labels: impl IntoIterator<Item = (ConceptId, String)>,
        field_map: BTreeMap<FieldTag, BTreeSet<ConceptId>>,
    ) -> Result<Self, CoreError> {
        let mut by_index: BTreeMap<u16, String> = BTreeMap::new();
        let mut seen_labels = BTreeSet::new();
        for (id, label) in labels {
            if id.domain != domain {
                return Err(CoreError::DomainMismatch {
                    expected: domain,
                    found: id.domain,
                });
            }
            if label.trim().is_empty() {
                return Err(CoreError::Taxonomy(format!("concept {id} has an empty label")));
            }
            if !seen_labels.insert(label.clone()) {
                return Err(CoreError::Taxonomy(format!("duplicate concept label `{label}`")));
            }
            if by_index.insert(id.index, label).is_some() {
                return Err(CoreError::Taxonomy(format!("duplicate concept index {}", id.index)));
            }
        }
        if by_index.is_empty() {
            return Err(CoreError::Taxonomy(format!("{domain} taxonomy declares no concepts")));
        }
        for (pos, index) in by_index.keys().enumerate() {
            if *index as usize != pos {
                return Err(CoreError::Taxonomy(format!(
                    "concept indices must be 0..{}, index {pos} is missing",
                    by_index.len()
                )));
            }
        }
        let concepts: Vec<Concept> = by_index
            .into_iter()
            .map(|(index, label)| Concept {
                id: ConceptId::new(domain, index),
                label,
            })
            .collect();
        for (field, targets) in &field_map {
            if targets.is_empty() {
                return Err(CoreError::Taxonomy(format!("field `{field}` maps to no concept")));
            }
            for c in targets {
                if c.domain != domain || c.index as usize >= concepts.len() {
                    return Err(CoreError::UnknownConcept(*c));
                }
            }
        }
        Ok(Taxonomy {
            domain,
            concepts,
            field_map,
        })
    }

    /// Parses the `domain,concept_index,concept_label,field` CSV format.
    ///
    /// Every row must name the same domain. A row with an empty `field`
    /// declares a concept without attaching a field to it.
    pub fn from_csv_str(text: &str) -> Result<Self, CoreError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
        let expected = ["domain", "concept_index", "concept_label", "field"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(CoreError::TaxonomyCsv {
                line: 1,
                message: format!("expected header `{}`", expected.join(",")),
            });
        }

        let mut domain: Option<StepKind> = None;
        let mut labels: BTreeMap<u16, String> = BTreeMap::new();
        let mut field_map: BTreeMap<FieldTag, BTreeSet<ConceptId>> = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(&e, 0))?;
            let line = record.position().map_or(0, |p| p.line());
            let row_err = |message: String| CoreError::TaxonomyCsv { line, message };
            if record.len() != 4 {
                return Err(row_err(format!("expected 4 columns, found {}", record.len())));
            }
            let kind: StepKind = record[0].parse().map_err(|e: CoreError| row_err(e.to_string()))?;
            match domain {
                None => domain = Some(kind),
                Some(d) if d != kind => {
                    return Err(row_err(format!("mixed domains `{d}` and `{kind}` in one file")))
                }
                Some(_) => {}
            }
            let index: u16 = record[1]
                .parse()
                .map_err(|_| row_err(format!("bad concept index `{}`", &record[1])))?;
            let label = record[2].to_string();
            if label.is_empty() {
                return Err(row_err("empty concept label".into()));
            }
            match labels.get(&index) {
                Some(existing) if *existing != label => {
                    return Err(row_err(format!(
                        "concept {index} labelled both `{existing}` and `{label}`"
                    )))
                }
                Some(_) => {}
                None => {
                    labels.insert(index, label);
                }
            }
            if !record[3].is_empty() {
                let field = FieldTag::new(&record[3]).map_err(|e| row_err(e.to_string()))?;
                field_map
                    .entry(field)
                    .or_default()
                    .insert(ConceptId::new(kind, index));
            }
        }
        let domain = domain.ok_or_else(|| CoreError::Taxonomy("taxonomy file has no rows".into()))?;
        let labels = labels
            .into_iter()
            .map(|(index, label)| (ConceptId::new(domain, index), label));
        Taxonomy::new(domain, labels, field_map)
    }

    /// Writes the taxonomy in the CSV format read by [`Taxonomy::from_csv_str`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut fields_of: HashMap<ConceptId, Vec<&FieldTag>> = HashMap::new();
        for (field, targets) in &self.field_map {
            for c in targets {
                fields_of.entry(*c).or_default().push(field);
            }
        }
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["domain", "concept_index", "concept_label", "field"])?;
        for concept in &self.concepts {
            let index = concept.id.index.to_string();
            match fields_of.get(&concept.id) {
                Some(fields) => {
                    for field in fields {
                        writer.write_record([
                            self.domain.as_str(),
                            &index,
                            &concept.label,
                            field.as_str(),
                        ])?;
                    }
                }
                None => writer.write_record([self.domain.as_str(), &index, &concept.label, ""])?,
            }
        }
        writer.flush()?;
        Ok(())
    }

    pub fn domain(&self) -> StepKind {
        self.domain
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn field_map(&self) -> &BTreeMap<FieldTag, BTreeSet<ConceptId>> {
        &self.field_map
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        id.domain == self.domain && (id.index as usize) < self.concepts.len()
    }

    pub fn concept(&self, id: ConceptId) -> Option<&Concept> {
        if id.domain != self.domain {
            return None;
        }
        self.concepts.get(id.index as usize)
    }

    pub fn label(&self, id: ConceptId) -> Option<&str> {
        self.concept(id).map(|c| c.label.as_str())
    }

    pub fn id_by_label(&self, label: &str) -> Option<ConceptId> {
        self.concepts
            .iter()
            .find(|c| c.label.eq_ignore_ascii_case(label))
            .map(|c| c.id)
    }

    pub fn ids(&self) -> impl Iterator<Item = ConceptId> + '_ {
        self.concepts.iter().map(|c| c.id)
    }

    /// Built-in taxonomy with one slug field per concept.
    pub fn builtin(domain: StepKind) -> Taxonomy {
        let labels = match domain {
            StepKind::Diploma => BUILTIN_DIPLOMA_LABELS,
            StepKind::Job => BUILTIN_JOB_LABELS,
        };
        Taxonomy::with_labels(domain, labels.iter().map(|s| s.to_string()).collect())
            .expect("built-in taxonomy is valid")
    }

    /// Taxonomy of `n` generic concepts (`diploma concept 03` ...), one slug field each.
    pub fn generic(domain: StepKind, n: usize) -> Result<Taxonomy, CoreError> {
        if n == 0 || n > u16::MAX as usize {
            return Err(CoreError::Taxonomy(format!("cannot build a taxonomy of {n} concepts")));
        }
        if domain == StepKind::Diploma && n == DIPLOMA_CONCEPTS
            || domain == StepKind::Job && n == JOB_CONCEPTS
        {
            return Ok(Taxonomy::builtin(domain));
        }
        let labels = (0..n).map(|i| format!("{domain} concept {i:02}")).collect();
        Taxonomy::with_labels(domain, labels)
    }

    fn with_labels(domain: StepKind, labels: Vec<String>) -> Result<Taxonomy, CoreError> {
        let mut field_map = BTreeMap::new();
        let mut pairs = Vec::with_capacity(labels.len());
        for (i, label) in labels.into_iter().enumerate() {
            let id = ConceptId::new(domain, i as u16);
            field_map.insert(slug_field(&label), BTreeSet::from([id]));
            pairs.push((id, label));
        }
        Taxonomy::new(domain, pairs, field_map)
    }

    /// The slug field the built-in and generic taxonomies attach to `id`.
    pub fn primary_field(&self, id: ConceptId) -> Option<FieldTag> {
        self.label(id).map(slug_field)
    }
}

/// The diploma and job taxonomies used together by ingestion and prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomies {
    pub diploma: Taxonomy,
    pub job: Taxonomy,
}

impl Taxonomies {
    pub fn new(diploma: Taxonomy, job: Taxonomy) -> Result<Self, CoreError> {
        if diploma.domain() != StepKind::Diploma {
            return Err(CoreError::DomainMismatch {
                expected: StepKind::Diploma,
                found: diploma.domain(),
            });
        }
        if job.domain() != StepKind::Job {
            return Err(CoreError::DomainMismatch {
                expected: StepKind::Job,
                found: job.domain(),
            });
        }
        Ok(Taxonomies { diploma, job })
    }

    /// The 17-concept diploma and 47-concept job built-ins.
    pub fn builtin() -> Self {
        Taxonomies {
            diploma: Taxonomy::builtin(StepKind::Diploma),
            job: Taxonomy::builtin(StepKind::Job),
        }
    }

    pub fn for_kind(&self, kind: StepKind) -> &Taxonomy {
        match kind {
            StepKind::Diploma => &self.diploma,
            StepKind::Job => &self.job,
        }
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.for_kind(id.domain).contains(id)
    }

    pub fn label(&self, id: ConceptId) -> Option<&str> {
        self.for_kind(id.domain).label(id)
    }
}

/// Maps a concept label onto a field tag: `CS & Internet` → `cs-and-internet`.
pub fn slug_field(label: &str) -> FieldTag {
    let mut slug = String::new();
    for word in label.replace('&', " and ").split(|c: char| !c.is_alphanumeric()) {
        if word.is_empty() {
            continue;
        }
        if !slug.is_empty() {
            slug.push('-');
        }
        slug.push_str(&word.to_lowercase());
    }
    FieldTag::new(&slug).expect("labels are non-empty")
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> CoreError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    CoreError::TaxonomyCsv {
        line,
        message: e.to_string(),
    }
}

/// Concepts of a step given its fields.
///
/// Each field votes for every concept it maps to. The result lists every
/// concept with at least one vote, by decreasing vote count and then by
/// increasing concept index. Unknown fields vote for nothing.
pub fn classify_step<'a>(
    fields: impl IntoIterator<Item = &'a FieldTag>,
    taxonomy: &Taxonomy,
) -> Vec<ConceptId> {
    let mut support: BTreeMap<ConceptId, usize> = BTreeMap::new();
    let unique: BTreeSet<&FieldTag> = fields.into_iter().collect();
    for field in unique {
        if let Some(targets) = taxonomy.field_map.get(field) {
            for c in targets {
                *support.entry(*c).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(ConceptId, usize)> = support.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.index.cmp(&b.0.index)));
    ranked.into_iter().map(|(c, _)| c).collect()
}

const BUILTIN_DIPLOMA_LABELS: &[&str] = &[
    "Math & Science",
    "CS & Internet",
    "Business & Management",
    "Law & Political Science",
    "Arts & Design",
    "Languages & Literature",
    "Health & Medicine",
    "Engineering & Industry",
    "Environment & Energy",
    "Social Sciences & Humanities",
    "Education & Teaching",
    "Communication & Media",
    "Agriculture & Food",
    "Tourism & Hospitality",
    "Sports",
    "Construction & Architecture",
    "Transport & Logistics",
];

const BUILTIN_JOB_LABELS: &[&str] = &[
    "CS & Internet",
    "Management & consulting",
    "Army & Security",
    "Business, Sales & Marketing",
    "Agriculture, fishing",
    "Health care",
    "Tourism & Hotels",
    "Environment & Energy",
    "Banking & Insurance",
    "Accounting & Finance",
    "Human Resources",
    "Law & Justice",
    "Public Administration",
    "Education & Training",
    "Research & Science",
    "Engineering",
    "Manufacturing & Industry",
    "Construction & Public Works",
    "Architecture & Urbanism",
    "Transport & Logistics",
    "Retail & Distribution",
    "Food Industry",
    "Restaurants & Catering",
    "Arts & Crafts",
    "Design & Graphics",
    "Media & Journalism",
    "Communication & Advertising",
    "Publishing & Books",
    "Audiovisual & Cinema",
    "Music & Performing Arts",
    "Sports & Leisure",
    "Social Work",
    "Personal Services",
    "Telecommunications",
    "Electronics",
    "Mechanics & Automotive",
    "Aeronautics & Space",
    "Chemistry & Pharmaceuticals",
    "Biology & Biotechnology",
    "Real Estate",
    "Utilities & Networks",
    "Textile & Fashion",
    "Beauty & Wellness",
    "Languages & Translation",
    "Maritime",
    "Mining & Materials",
    "Quality & Safety",
];
