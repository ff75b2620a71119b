//! Job lifecycle and persistence.
//!
//! Every accepted write reaches the record store before the in-memory copy
//! changes, so a restart never loses an acknowledged transition.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::auth::User;
use crate::qdsl::Bindings;
use crate::simulator::Counts;
use crate::storage::{RecordDir, StorageError};

pub const DEFAULT_THRESHOLD_MS: u64 = 60_000;
pub const JOB_SCHEMA: &str = "qfaas.job.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobStatus {
    Created,
    Queued,
    Running,
    Completed,
    Failed,
}

impl JobStatus {
    pub const ALL: [JobStatus; 5] = [
        JobStatus::Created,
        JobStatus::Queued,
        JobStatus::Running,
        JobStatus::Completed,
        JobStatus::Failed,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Completed | JobStatus::Failed)
    }

    pub fn can_move_to(self, to: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, to),
            (Created, Queued) | (Queued, Running) | (Queued, Failed) | (Running, Completed) | (Running, Failed)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Created => "Created",
            JobStatus::Queued => "Queued",
            JobStatus::Running => "Running",
            JobStatus::Completed => "Completed",
            JobStatus::Failed => "Failed",
        }
    }
}

impl std::fmt::Display for JobStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for JobStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JobStatus::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown job status `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub function_identifier: String,
    pub owner: String,
    pub backend_name: String,
    pub provider: String,
    pub shots: u64,
    pub seed: u64,
    pub status: JobStatus,
    pub submitted_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub counts: Option<Counts>,
    pub result_data: Option<Value>,
    pub error: Option<String>,
    pub waiting_ms: Option<u64>,
    pub running_ms: Option<u64>,
    /// Parameter values the circuit was built with; post-processing reads them.
    #[serde(default)]
    pub bindings: Bindings,
}

/// What a transition carries besides the target status.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    None,
    Result { counts: Counts, data: Value },
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NewJob {
    pub function_identifier: String,
    pub owner: String,
    pub backend_name: String,
    pub provider: String,
    pub shots: u64,
    pub seed: u64,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobFilter {
    pub owner: Option<String>,
    pub function: Option<String>,
    pub status: Option<JobStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Self { offset: 0, limit: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobPage {
    pub total: usize,
    pub offset: usize,
    pub items: Vec<Job>,
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: JobStatus, to: JobStatus },
    #[error("not allowed to access job `{0}`")]
    PermissionDenied(String),
    #[error(transparent)]
    StorageFailure(#[from] StorageError),
}

struct Slot {
    job: Mutex<Job>,
    changed: Condvar,
}

pub struct JobStore {
    jobs: RwLock<HashMap<String, Arc<Slot>>>,
    by_owner: RwLock<HashMap<String, Vec<String>>>,
    store: RecordDir,
}

fn millis_between(a: DateTime<Utc>, b: DateTime<Utc>) -> u64 {
    (b - a).num_milliseconds().max(0) as u64
}

impl JobStore {
    pub fn open(store: RecordDir) -> Result<Self, JobError> {
        let mut jobs = HashMap::new();
        let mut by_owner: HashMap<String, Vec<String>> = HashMap::new();
        for job in store.load_all::<Job>()? {
            by_owner.entry(job.owner.clone()).or_default().push(job.job_id.clone());
            jobs.insert(
                job.job_id.clone(),
                Arc::new(Slot {
                    job: Mutex::new(job),
                    changed: Condvar::new(),
                }),
            );
        }
        Ok(Self {
            jobs: RwLock::new(jobs),
            by_owner: RwLock::new(by_owner),
            store,
        })
    }

    pub fn in_memory() -> Self {
        Self::open(RecordDir::in_memory(JOB_SCHEMA)).expect("in-memory store cannot fail")
    }

    pub fn create(&self, new: NewJob) -> Result<Job, JobError> {
        let job = Job {
            job_id: uuid::Uuid::new_v4().to_string(),
            function_identifier: new.function_identifier,
            owner: new.owner,
            backend_name: new.backend_name,
            provider: new.provider,
            shots: new.shots,
            seed: new.seed,
            status: JobStatus::Created,
            submitted_at: Utc::now(),
            started_at: None,
            finished_at: None,
            counts: None,
            result_data: None,
            error: None,
            waiting_ms: None,
            running_ms: None,
            bindings: new.bindings,
        };
        self.store.write(&job.job_id, &job)?;
        self.by_owner
            .write()
            .entry(job.owner.clone())
            .or_default()
            .push(job.job_id.clone());
        self.jobs.write().insert(
            job.job_id.clone(),
            Arc::new(Slot {
                job: Mutex::new(job.clone()),
                changed: Condvar::new(),
            }),
        );
        Ok(job)
    }

    fn slot(&self, job_id: &str) -> Result<Arc<Slot>, JobError> {
        self.jobs
            .read()
            .get(job_id)
            .cloned()
            .ok_or_else(|| JobError::UnknownJob(job_id.to_string()))
    }

    pub fn transition(&self, job_id: &str, to: JobStatus, payload: Payload) -> Result<Job, JobError> {
        let slot = self.slot(job_id)?;
        let mut current = slot.job.lock();
        let from = current.status;
        let payload_fits = match (&payload, to) {
            (Payload::Result { .. }, JobStatus::Completed) => true,
            (Payload::Error(e), JobStatus::Failed) => !e.is_empty(),
            (Payload::None, JobStatus::Queued | JobStatus::Running) => true,
            _ => false,
        };
        if !from.can_move_to(to) || !payload_fits {
            return Err(JobError::IllegalTransition { from, to });
        }
        let now = Utc::now().max(current.submitted_at);
        let mut next = current.clone();
        next.status = to;
        match to {
            JobStatus::Running => {
                next.started_at = Some(now);
                next.waiting_ms = Some(millis_between(next.submitted_at, now));
            }
            JobStatus::Completed | JobStatus::Failed => {
                let now = next.started_at.map_or(now, |s| now.max(s));
                next.finished_at = Some(now);
                match next.started_at {
                    Some(s) => next.running_ms = Some(millis_between(s, now)),
                    None => next.waiting_ms = Some(millis_between(next.submitted_at, now)),
                }
            }
            _ => {}
        }
        match payload {
            Payload::Result { counts, data } => {
                next.counts = Some(counts);
                next.result_data = Some(data);
            }
            Payload::Error(e) => next.error = Some(e),
            Payload::None => {}
        }
        self.store.write(job_id, &next)?;
        *current = next.clone();
        drop(current);
        slot.changed.notify_all();
        Ok(next)
    }

    pub fn get(&self, job_id: &str) -> Result<Job, JobError> {
        Ok(self.slot(job_id)?.job.lock().clone())
    }

    /// Like [`get`](Self::get) but only for the owner or an admin.
    pub fn get_as(&self, user: &User, job_id: &str) -> Result<Job, JobError> {
        let job = self.get(job_id)?;
        if job.owner != user.username && !user.is_admin() {
            return Err(JobError::PermissionDenied(job_id.to_string()));
        }
        Ok(job)
    }

    /// Blocks until the job is terminal or `threshold` passes, then returns
    /// the current snapshot. Never cancels anything.
    pub fn await_result(&self, job_id: &str, threshold: Duration) -> Result<Job, JobError> {
        let slot = self.slot(job_id)?;
        let deadline = Instant::now() + threshold;
        let mut job = slot.job.lock();
        while !job.status.is_terminal() {
            if slot.changed.wait_until(&mut job, deadline).timed_out() {
                break;
            }
        }
        Ok(job.clone())
    }

    /// Jobs matching `filter`, newest first. Non-admins only see their own.
    pub fn list(&self, user: &User, filter: &JobFilter, page: Page) -> JobPage {
        let owner = if user.is_admin() {
            filter.owner.clone()
        } else {
            Some(user.username.clone())
        };
        let slots: Vec<Arc<Slot>> = {
            let jobs = self.jobs.read();
            match &owner {
                Some(o) => self
                    .by_owner
                    .read()
                    .get(o)
                    .into_iter()
                    .flatten()
                    .filter_map(|id| jobs.get(id).cloned())
                    .collect(),
                None => jobs.values().cloned().collect(),
            }
        };
        let mut matched: Vec<Job> = slots
            .iter()
            .map(|s| s.job.lock().clone())
            .filter(|j| owner.as_ref().is_none_or(|o| &j.owner == o))
            .filter(|j| filter.function.as_ref().is_none_or(|f| &j.function_identifier == f))
            .filter(|j| filter.status.is_none_or(|s| j.status == s))
            .collect();
        matched.sort_by(|a, b| b.submitted_at.cmp(&a.submitted_at).then_with(|| a.job_id.cmp(&b.job_id)));
        let total = matched.len();
        let items = matched.into_iter().skip(page.offset).take(page.limit).collect();
        JobPage {
            total,
            offset: page.offset,
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.jobs.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Count of jobs per status.
    pub fn status_counts(&self) -> HashMap<JobStatus, usize> {
        let mut out = HashMap::new();
        for slot in self.jobs.read().values() {
            *out.entry(slot.job.lock().status).or_default() += 1;
        }
        out
    }

    /// Fails jobs left unfinished by a previous process. Returns their ids.
    pub fn fail_unfinished(&self, reason: &str) -> Result<Vec<String>, JobError> {
        let ids: Vec<String> = self
            .jobs
            .read()
            .iter()
            .filter(|(_, s)| !s.job.lock().status.is_terminal())
            .map(|(id, _)| id.clone())
            .collect();
        for id in &ids {
            if self.get(id)?.status == JobStatus::Created {
                self.transition(id, JobStatus::Queued, Payload::None)?;
            }
            self.transition(id, JobStatus::Failed, Payload::Error(reason.to_string()))?;
        }
        Ok(ids)
    }
}
