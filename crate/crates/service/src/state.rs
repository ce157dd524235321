use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use nextstep_core::ingest::{corpus_stats, load_corpus};
use nextstep_core::{
    AliasTable, CorpusStats, FrequencyModel, Method, StepKind, Taxonomies, Taxonomy, Trajectory,
};

use crate::error::LoadError;

/// Where the service reads its inputs from. Missing taxonomy paths fall back
/// to the built-in taxonomies; a missing corpus leaves the service untrained.
#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub corpus: Option<PathBuf>,
    pub taxonomy_diploma: Option<PathBuf>,
    pub taxonomy_job: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl ServiceConfig {
    pub fn taxonomies(&self) -> Result<Taxonomies, LoadError> {
        let load = |path: &Option<PathBuf>, kind| -> Result<Taxonomy, LoadError> {
            match path {
                Some(p) => Ok(Taxonomy::from_csv_str(&read(p)?)?),
                None => Ok(Taxonomy::builtin(kind)),
            }
        };
        Ok(Taxonomies::new(
            load(&self.taxonomy_diploma, StepKind::Diploma)?,
            load(&self.taxonomy_job, StepKind::Job)?,
        )?)
    }

    pub fn load(&self) -> Result<Snapshot, LoadError> {
        let taxonomies = self.taxonomies()?;
        let Some(corpus_path) = &self.corpus else {
            return Ok(Snapshot::untrained(taxonomies));
        };
        let aliases = match &self.aliases {
            Some(p) => AliasTable::from_csv_str(&read(p)?)?,
            None => AliasTable::new(),
        };
        let (corpus, _) = load_corpus(corpus_path, &aliases, &taxonomies)?;
        Snapshot::trained(taxonomies, corpus)
    }
}

/// Models for one target kind.
#[derive(Debug, Clone)]
pub struct KindModels {
    pub previous: FrequencyModel,
    pub next: FrequencyModel,
}

#[derive(Debug)]
pub struct Trained {
    pub corpus: Vec<Trajectory>,
    pub stats: CorpusStats,
    pub diploma: KindModels,
    pub job: KindModels,
}

impl Trained {
    pub fn models(&self, kind: StepKind) -> &KindModels {
        match kind {
            StepKind::Diploma => &self.diploma,
            StepKind::Job => &self.job,
        }
    }
}

/// Everything a request reads. Swapped whole on reload.
#[derive(Debug)]
pub struct Snapshot {
    pub taxonomies: Taxonomies,
    pub trained: Option<Trained>,
}

impl Snapshot {
    pub fn untrained(taxonomies: Taxonomies) -> Self {
        Snapshot {
            taxonomies,
            trained: None,
        }
    }

    pub fn trained(taxonomies: Taxonomies, corpus: Vec<Trajectory>) -> Result<Self, LoadError> {
        let models = |kind| -> Result<KindModels, LoadError> {
            let tax = taxonomies.for_kind(kind);
            Ok(KindModels {
                previous: FrequencyModel::train(&corpus, tax, Method::PreviousStep)?,
                next: FrequencyModel::train(&corpus, tax, Method::NextStepIntent)?,
            })
        };
        let trained = Trained {
            diploma: models(StepKind::Diploma)?,
            job: models(StepKind::Job)?,
            stats: corpus_stats(&corpus),
            corpus,
        };
        Ok(Snapshot {
            taxonomies,
            trained: Some(trained),
        })
    }
}

/// Shared handle; readers clone the inner `Arc` and never block a reload
/// for longer than the pointer swap.
#[derive(Debug, Clone)]
pub struct SharedSnapshot(Arc<RwLock<Arc<Snapshot>>>);

impl SharedSnapshot {
    pub fn new(snapshot: Snapshot) -> Self {
        SharedSnapshot(Arc::new(RwLock::new(Arc::new(snapshot))))
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, snapshot: Snapshot) {
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
    }
}
