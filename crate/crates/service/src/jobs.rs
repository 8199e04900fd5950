//! In-memory job records for long-running HTTP requests.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub kind: String,
    pub status: JobStatus,
    /// In `[0, 1]`; 1 once done.
    pub progress: f64,
    pub artifacts: Vec<String>,
    pub error: Option<String>,
}

/// Status only moves forward: queued, running, then done or failed.
#[derive(Debug, Clone, Default)]
pub struct JobStore {
    inner: Arc<Mutex<Inner>>,
}

#[derive(Debug, Default)]
struct Inner {
    next: u64,
    jobs: BTreeMap<String, JobRecord>,
}

impl JobStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create(&self, kind: &str) -> JobRecord {
        let mut inner = self.inner.lock().expect("job store poisoned");
        inner.next += 1;
        let job = JobRecord {
            job_id: format!("job-{}", inner.next),
            kind: kind.to_string(),
            status: JobStatus::Queued,
            progress: 0.0,
            artifacts: Vec::new(),
            error: None,
        };
        inner.jobs.insert(job.job_id.clone(), job.clone());
        job
    }

    pub fn get(&self, job_id: &str) -> Option<JobRecord> {
        self.inner.lock().expect("job store poisoned").jobs.get(job_id).cloned()
    }

    fn update(&self, job_id: &str, f: impl FnOnce(&mut JobRecord)) -> bool {
        let mut inner = self.inner.lock().expect("job store poisoned");
        match inner.jobs.get_mut(job_id) {
            Some(job) if !job.status.is_terminal() => {
                f(job);
                true
            }
            _ => false,
        }
    }

    pub fn start(&self, job_id: &str) -> bool {
        self.update(job_id, |j| j.status = JobStatus::Running)
    }

    /// Ignored unless running; progress never decreases.
    pub fn progress(&self, job_id: &str, progress: f64) -> bool {
        self.update(job_id, |j| {
            if j.status == JobStatus::Running {
                j.progress = j.progress.max(progress.clamp(0.0, 1.0));
            }
        })
    }

    pub fn finish(&self, job_id: &str, artifacts: Vec<String>) -> bool {
        self.update(job_id, |j| {
            j.status = JobStatus::Done;
            j.progress = 1.0;
            j.artifacts = artifacts;
        })
    }

    pub fn fail(&self, job_id: &str, error: String) -> bool {
        self.update(job_id, |j| {
            j.status = JobStatus::Failed;
            j.error = Some(error);
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifecycle_moves_forward_only() {
        let store = JobStore::new();
        let job = store.create("ingest");
        assert_eq!(job.status, JobStatus::Queued);
        assert!(store.start(&job.job_id));
        assert!(store.progress(&job.job_id, 0.5));
        store.progress(&job.job_id, 0.2);
        assert_eq!(store.get(&job.job_id).unwrap().progress, 0.5);
        assert!(store.finish(&job.job_id, vec!["a".into()]));
        assert!(!store.fail(&job.job_id, "late".into()));
        assert!(!store.start(&job.job_id));
        let done = store.get(&job.job_id).unwrap();
        assert_eq!(done.status, JobStatus::Done);
        assert_eq!(done.progress, 1.0);
        assert_eq!(done.error, None);
    }

    #[test]
    fn ids_are_unique() {
        let store = JobStore::new();
        let a = store.create("ingest").job_id;
        let b = store.create("ingest").job_id;
        assert_ne!(a, b);
        assert!(store.get("job-999").is_none());
    }
}
