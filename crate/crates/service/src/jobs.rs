//! Background evaluation jobs.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use nextstep_core::{EvalReport, Method, ScoreParams, StepKind};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    pub target_kind: StepKind,
    pub method: Method,
    #[serde(default)]
    pub params: Option<ScoreParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done { report: EvalReport },
    Failed { message: String },
}

#[derive(Debug, Default)]
pub struct JobStore {
    next: AtomicU64,
    jobs: Mutex<BTreeMap<u64, JobStatus>>,
}

impl JobStore {
    pub fn start(&self) -> u64 {
        let id = self.next.fetch_add(1, Ordering::Relaxed) + 1;
        self.lock().insert(id, JobStatus::Running);
        id
    }

    pub fn finish(&self, id: u64, status: JobStatus) {
        self.lock().insert(id, status);
    }

    pub fn get(&self, id: u64) -> Option<JobStatus> {
        self.lock().get(&id).cloned()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BTreeMap<u64, JobStatus>> {
        self.jobs.lock().unwrap_or_else(|e| e.into_inner())
    }
}
