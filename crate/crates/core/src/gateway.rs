//! The service layer behind the HTTP API: authentication, function
//! management, invocation, jobs and backends. Every operation returns an
//! [`ApiError`] carrying the HTTP status it maps to.

use std::path::Path;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::auth::{Auth, AuthError, Role, User};
use crate::circuit::Circuit;
use crate::config::Config;
use crate::jobstore::{Job, JobError, JobFilter, JobPage, JobStatus, JobStore, NewJob, Page, Payload, JOB_SCHEMA};
use crate::metrics::Metrics;
use crate::providers::{
    BackendFilter, BackendInfo, BackendKind, CatalogError, HandleObserver, HandleState, ProviderCatalog,
    ProviderConfig, ProviderError, Providers, VerifyError,
};
use crate::qdsl::{self, Bindings, EvalError, PostError, PostStep, PreprocessError};
use crate::registry::{
    CreateFunction, DeploymentRecord, FunctionRecord, PipelineMode, Registry, RegistryError, UpdateFunction,
    FUNCTION_SCHEMA,
};
use crate::selector::{self, SelectError, SelectionCriteria};
use crate::storage::{RecordDir, StorageError};

pub const USER_SCHEMA: &str = "qfaas.user.v1";
pub const MAX_SHOTS: u64 = 1_000_000;

/// Error body: `{"error": code, "message": text, "details": value}`.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{error}: {message}")]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            error: code.to_string(),
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(401, "unauthorized", message)
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(403, "forbidden", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(404, "not_found", message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(422, "validation_error", message)
    }

    pub fn unavailable(message: impl Into<String>) -> Self {
        Self::new(503, "unavailable", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(500, "internal", message)
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> Self {
        match e {
            AuthError::InvalidCredentials | AuthError::InvalidToken => Self::unauthorized(e.to_string()),
            AuthError::UserExists(_) => Self::new(409, "conflict", e.to_string()),
            AuthError::InvalidUsername(_) => Self::invalid(e.to_string()),
            AuthError::Storage(_) => Self::internal(e.to_string()),
        }
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Conflict(_) => Self::new(409, "conflict", e.to_string()),
            RegistryError::Validation(_) => Self::invalid(e.to_string()),
            RegistryError::PermissionDenied(_) => Self::forbidden(e.to_string()),
            RegistryError::UnknownFunction(_) => Self::not_found(e.to_string()),
            RegistryError::Storage(_) => Self::internal(e.to_string()),
        }
    }
}

impl From<JobError> for ApiError {
    fn from(e: JobError) -> Self {
        match e {
            JobError::UnknownJob(_) => Self::not_found(e.to_string()),
            JobError::PermissionDenied(_) => Self::forbidden(e.to_string()),
            JobError::IllegalTransition { .. } => Self::new(409, "conflict", e.to_string()),
            JobError::StorageFailure(_) => Self::internal(e.to_string()),
        }
    }
}

impl From<VerifyError> for ApiError {
    fn from(e: VerifyError) -> Self {
        let details = serde_json::to_value(&e).unwrap_or(Value::Null);
        match e {
            VerifyError::UnknownBackend(_) | VerifyError::InsufficientQubits { .. } => Self::invalid(e.to_string()),
            VerifyError::PermissionDenied { .. } => Self::forbidden(e.to_string()),
            VerifyError::BackendDown(_) => Self::unavailable(e.to_string()),
        }
        .with_details(details)
    }
}

impl From<SelectError> for ApiError {
    fn from(e: SelectError) -> Self {
        match e {
            SelectError::NoEligibleBackend(reasons) => Self::unavailable("no eligible backend")
                .with_details(json!({ "rejections": reasons })),
            SelectError::BackendNameRequired => Self::invalid(e.to_string()),
            SelectError::Verify(v) => v.into(),
        }
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::CapacityExceeded { .. } => Self::unavailable(e.to_string()),
            ProviderError::UnknownBackend(_) => Self::unavailable(e.to_string()),
            ProviderError::InvalidShots | ProviderError::InvalidCircuit(_) => Self::invalid(e.to_string()),
            ProviderError::UnknownHandle(_) => Self::internal(e.to_string()),
        }
    }
}

impl From<PreprocessError> for ApiError {
    fn from(e: PreprocessError) -> Self {
        let details = match &e {
            PreprocessError::MissingParam { param } => json!({ "kind": "missing_param", "param": param }),
            PreprocessError::RangeViolation { param, value, min, max } => {
                json!({ "kind": "range_violation", "param": param, "value": value, "min": min, "max": max })
            }
            PreprocessError::TypeViolation(_) => json!({ "kind": "type_violation" }),
        };
        Self::invalid(e.to_string()).with_details(details)
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        Self::invalid(format!("circuit generation failed: {e}"))
    }
}

impl From<StorageError> for ApiError {
    fn from(e: StorageError) -> Self {
        Self::internal(e.to_string())
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InvocationRequest {
    #[serde(default)]
    pub input: Value,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default = "default_true")]
    pub wait_for_result: bool,
    #[serde(default)]
    pub provider: Option<String>,
    #[serde(default = "default_true")]
    pub auto_select: bool,
    #[serde(default)]
    pub backend_type: Option<BackendKind>,
    #[serde(default)]
    pub backend_name: Option<String>,
    #[serde(default)]
    pub post_process_only: bool,
    #[serde(default)]
    pub job_id: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for InvocationRequest {
    fn default() -> Self {
        Self {
            input: Value::Null,
            shots: None,
            wait_for_result: true,
            provider: None,
            auto_select: true,
            backend_type: None,
            backend_name: None,
            post_process_only: false,
            job_id: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationResponse {
    pub data: Value,
    pub details: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoginResponse {
    pub access_token: String,
    pub token_type: String,
    pub expires_in: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewUser {
    pub username: String,
    pub password: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserInfo {
    pub username: String,
    pub role: Role,
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Jobs(#[from] JobError),
}

/// The whole engine in one value; cheap to share behind an `Arc`.
pub struct Gateway {
    pub auth: Auth,
    pub registry: Registry,
    pub jobs: Arc<JobStore>,
    pub providers: Providers,
    pub metrics: Arc<Metrics>,
    config: Config,
}

fn record_dir(root: Option<&Path>, sub: &str, schema: &'static str, durable: bool) -> Result<RecordDir, StorageError> {
    match root {
        Some(root) => RecordDir::open(&root.join(sub), schema, durable),
        None => Ok(RecordDir::in_memory(schema)),
    }
}

impl Gateway {
    /// Opens stores, loads the catalog and seeds the admin account. The
    /// second value is the admin password when the account was just created.
    pub fn open(config: Config) -> Result<(Self, Option<String>), StartupError> {
        Self::open_with(config, PipelineMode::Background)
    }

    pub fn open_with(config: Config, mode: PipelineMode) -> Result<(Self, Option<String>), StartupError> {
        let catalog = match &config.catalog {
            Some(path) => ProviderCatalog::load(path)?,
            None => ProviderCatalog::default_catalog(),
        };
        let root = config.data_dir.as_deref();
        let auth = Auth::open(record_dir(root, "users", USER_SCHEMA, config.durable)?, config.token_ttl_secs)?;
        let admin_password = auth.ensure_admin(config.admin_password.as_deref())?;
        let registry = Registry::open(record_dir(root, "functions", FUNCTION_SCHEMA, config.durable)?, mode)?;
        let jobs = Arc::new(JobStore::open(record_dir(root, "jobs", JOB_SCHEMA, config.durable)?)?);
        let orphaned = jobs.fail_unfinished("interrupted by gateway restart")?;
        if !orphaned.is_empty() {
            tracing::warn!(count = orphaned.len(), "failed jobs left unfinished by a previous run");
        }
        let providers = Providers::new(
            catalog,
            ProviderConfig {
                workers: config.sim_workers.max(1),
                max_in_flight: config.max_in_flight,
                max_qubits: config.max_qubits,
                ..ProviderConfig::default()
            },
        );
        Ok((
            Self {
                auth,
                registry,
                jobs,
                providers,
                metrics: Arc::new(Metrics::default()),
                config,
            },
            admin_password,
        ))
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn login(&self, username: &str, password: &str) -> Result<LoginResponse, ApiError> {
        let token = self.auth.login(username, password)?;
        Ok(LoginResponse {
            access_token: token.access_token,
            token_type: "bearer".into(),
            expires_in: self.auth.token_ttl_secs(),
        })
    }

    pub fn authenticate(&self, bearer: Option<&str>) -> Result<User, ApiError> {
        let token = bearer.ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
        Ok(self.auth.authenticate(token)?)
    }

    pub fn create_user(&self, caller: &User, new: NewUser) -> Result<UserInfo, ApiError> {
        if !caller.is_admin() {
            return Err(ApiError::forbidden("only admins may create users"));
        }
        if new.password.is_empty() {
            return Err(ApiError::invalid("password must not be empty"));
        }
        let u = self.auth.create_user(&new.username, &new.password, new.role)?;
        Ok(UserInfo {
            username: u.username,
            role: u.role,
        })
    }

    pub fn list_users(&self, caller: &User) -> Result<Vec<UserInfo>, ApiError> {
        if !caller.is_admin() {
            return Err(ApiError::forbidden("only admins may list users"));
        }
        Ok(self
            .auth
            .users()
            .into_iter()
            .map(|u| UserInfo {
                username: u.username,
                role: u.role,
            })
            .collect())
    }

    pub fn create_function(&self, caller: &User, req: CreateFunction) -> Result<(FunctionRecord, DeploymentRecord), ApiError> {
        Ok(self.registry.create_function(req, caller)?)
    }

    pub fn update_function(&self, caller: &User, identifier: &str, req: UpdateFunction) -> Result<(FunctionRecord, DeploymentRecord), ApiError> {
        Ok(self.registry.update_function(identifier, req, caller)?)
    }

    pub fn get_function(&self, caller: &User, identifier: &str) -> Result<FunctionRecord, ApiError> {
        Ok(self.registry.get_as(identifier, caller)?)
    }

    pub fn list_functions(&self, caller: &User) -> Vec<FunctionRecord> {
        self.registry.list(caller)
    }

    pub fn delete_function(&self, caller: &User, identifier: &str) -> Result<FunctionRecord, ApiError> {
        Ok(self.registry.delete(identifier, caller)?)
    }

    pub fn deployments(&self, caller: &User, identifier: &str) -> Result<Vec<DeploymentRecord>, ApiError> {
        Ok(self.registry.deployments(identifier, caller)?)
    }

    pub fn backends(&self, filter: &BackendFilter) -> Vec<BackendInfo> {
        self.providers.list_backends(filter)
    }

    pub fn get_job(&self, caller: &User, job_id: &str) -> Result<Job, ApiError> {
        Ok(self.jobs.get_as(caller, job_id)?)
    }

    pub fn list_jobs(&self, caller: &User, filter: &JobFilter, page: Page) -> JobPage {
        self.jobs.list(caller, filter, page)
    }

    pub fn render_metrics(&self) -> String {
        let depth: Vec<(String, u64)> = self
            .providers
            .snapshot()
            .backends
            .into_iter()
            .map(|b| (b.name, b.queue_length))
            .collect();
        self.metrics.render(&depth)
    }

    /// Resolves a deployed function the caller may invoke.
    fn invocable(&self, caller: &User, identifier: &str) -> Result<(FunctionRecord, qdsl::FunctionDef), ApiError> {
        let record = self
            .registry
            .get(identifier)
            .map_err(|_| ApiError::not_found(format!("no function deployed at `{identifier}`")))?;
        if !crate::registry::can_view(caller, &record) {
            return Err(ApiError::forbidden(format!("function `{identifier}` is private")));
        }
        match (&record.compiled, record.is_ready()) {
            (Some(def), true) => {
                let def = def.clone();
                Ok((record, def))
            }
            _ => Err(ApiError::not_found(format!(
                "function `{identifier}` is not deployed (status {:?})",
                record.status
            ))),
        }
    }

    /// Runs the invocation sequence for `identifier` on behalf of `caller`.
    pub fn invoke(&self, caller: &User, identifier: &str, req: InvocationRequest) -> Result<InvocationResponse, ApiError> {
        let (_record, def) = self.invocable(caller, identifier)?;
        if req.post_process_only {
            return self.post_process_only(caller, identifier, &def, req.job_id.as_deref());
        }

        let shots = req.shots.unwrap_or(self.config.default_shots);
        if shots == 0 || shots > MAX_SHOTS {
            return Err(ApiError::invalid(format!("shots must be between 1 and {MAX_SHOTS}")));
        }
        let bindings = qdsl::preprocess(&def, &req.input)?;
        let circuit = qdsl::instantiate(&def, &bindings)?;
        let stats = circuit.stats().map_err(|e| ApiError::invalid(e.to_string()))?;

        let criteria = SelectionCriteria {
            provider: req.provider.clone(),
            backend_type: req.backend_type,
            backend_name: req.backend_name.clone(),
            auto_select: req.auto_select,
        };
        let snapshot = self.providers.snapshot();
        let decision = selector::select(&snapshot, caller.role, &stats, &criteria)?;
        let backend = decision.backend;

        let seed = req.seed.unwrap_or_else(rand::random);
        let job = self.jobs.create(NewJob {
            function_identifier: identifier.to_string(),
            owner: caller.username.clone(),
            backend_name: backend.name.clone(),
            provider: backend.provider.clone(),
            shots,
            seed,
            bindings: bindings.clone(),
        })?;
        self.jobs.transition(&job.job_id, JobStatus::Queued, Payload::None)?;

        let observer = self.observer(job.job_id.clone(), def.post_pipeline.clone(), bindings);
        if let Err(e) = self.providers.submit(&backend, &circuit, shots, Some(seed), Some(observer)) {
            let _ = self
                .jobs
                .transition(&job.job_id, JobStatus::Failed, Payload::Error(e.to_string()));
            self.metrics.jobs_failed.fetch_add(1, Ordering::Relaxed);
            return Err(e.into());
        }
        self.metrics.invocations.fetch_add(1, Ordering::Relaxed);

        let job = if req.wait_for_result {
            self.jobs
                .await_result(&job.job_id, Duration::from_millis(self.config.threshold_ms))?
        } else {
            self.jobs.get(&job.job_id)?
        };
        let mut response = response_for(&job, Some(&circuit));
        response
            .details
            .insert("selection".into(), Value::String(decision.reason));
        Ok(response)
    }

    fn post_process_only(&self, caller: &User, identifier: &str, def: &qdsl::FunctionDef, job_id: Option<&str>) -> Result<InvocationResponse, ApiError> {
        let job_id = job_id.ok_or_else(|| ApiError::invalid("postProcessOnly requires jobId"))?;
        let job = self.jobs.get_as(caller, job_id)?;
        if job.function_identifier != identifier {
            return Err(ApiError::invalid(format!(
                "job `{job_id}` belongs to `{}`, not `{identifier}`",
                job.function_identifier
            )));
        }
        let counts = match (&job.status, &job.counts) {
            (JobStatus::Completed, Some(c)) => c.clone(),
            _ => {
                return Err(ApiError::new(
                    409,
                    "job_not_completed",
                    format!("job `{job_id}` is {} and has no counts", job.status),
                ))
            }
        };
        let out = qdsl::postprocess(&counts, &def.post_pipeline, &job.bindings)
            .map_err(|e| ApiError::invalid(format!("post-processing failed: {e}")))?;
        self.metrics.invocations.fetch_add(1, Ordering::Relaxed);
        let mut response = response_for(&job, None);
        response.data = out.data;
        response.details.insert("postProcessOnly".into(), Value::Bool(true));
        Ok(response)
    }

    fn observer(&self, job_id: String, pipeline: Vec<PostStep>, bindings: Bindings) -> HandleObserver {
        let jobs = Arc::clone(&self.jobs);
        let metrics = Arc::clone(&self.metrics);
        Arc::new(move |handle| {
            let outcome = match handle.state {
                HandleState::Queued => return,
                HandleState::Running => jobs.transition(&job_id, JobStatus::Running, Payload::None),
                HandleState::Done => {
                    let counts = handle.result.as_ref().map(|r| r.counts.clone()).unwrap_or_default();
                    match qdsl::postprocess(&counts, &pipeline, &bindings) {
                        Ok(out) => {
                            metrics.jobs_completed.fetch_add(1, Ordering::Relaxed);
                            jobs.transition(&job_id, JobStatus::Completed, Payload::Result { counts, data: out.data })
                        }
                        Err(e) => {
                            metrics.jobs_failed.fetch_add(1, Ordering::Relaxed);
                            jobs.transition(&job_id, JobStatus::Failed, Payload::Error(post_failure(&e)))
                        }
                    }
                }
                HandleState::Failed => {
                    metrics.jobs_failed.fetch_add(1, Ordering::Relaxed);
                    let msg = handle.error.clone().unwrap_or_else(|| "backend execution failed".into());
                    jobs.transition(&job_id, JobStatus::Failed, Payload::Error(msg))
                }
            };
            if let Err(e) = outcome {
                tracing::error!(job = %job_id, error = %e, "could not record job transition");
            }
        })
    }
}

fn post_failure(e: &PostError) -> String {
    format!("post-processing failed: {e}")
}

/// `{data, details}` for a job snapshot; `data` is null unless Completed.
pub fn response_for(job: &Job, circuit: Option<&Circuit>) -> InvocationResponse {
    let mut details = Map::new();
    details.insert("jobId".into(), json!(job.job_id));
    details.insert("status".into(), json!(job.status));
    details.insert("backend".into(), json!(job.backend_name));
    details.insert("provider".into(), json!(job.provider));
    if let Some(c) = &job.counts {
        details.insert("counts".into(), json!(c));
    }
    details.insert("shots".into(), json!(job.shots));
    details.insert("seed".into(), json!(job.seed));
    details.insert("waiting_ms".into(), json!(job.waiting_ms));
    details.insert("running_ms".into(), json!(job.running_ms));
    if let Some(text) = circuit.and_then(|c| c.to_text().ok()) {
        details.insert("circuit".into(), Value::String(text));
    }
    if let Some(e) = &job.error {
        details.insert("error".into(), json!(e));
    }
    let data = match job.status {
        JobStatus::Completed => job.result_data.clone().unwrap_or(Value::Null),
        _ => Value::Null,
    };
    InvocationResponse { data, details }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::FnCode;

    const QRNG: &str = "fn qrng\nparam n : int min=1 max=24 default=4\ncircuit {\n  qubits n\n  repeat q in 0..n { h q }\n  measure all\n}\npost top | to_int\n";

    fn gateway() -> Gateway {
        let (g, pw) = Gateway::open_with(Config::ephemeral(), PipelineMode::Inline).unwrap();
        assert!(pw.is_some());
        g
    }

    fn deploy(g: &Gateway, dev: &User, public: bool) {
        g.create_function(
            dev,
            CreateFunction {
                name: "qrng".into(),
                template: "qiskit".into(),
                fn_code: FnCode::from_source(QRNG),
                public,
                author: None,
            },
        )
        .unwrap();
    }

    #[test]
    fn qrng_on_local_simulator() {
        let g = gateway();
        let dev = User::ephemeral("dev", Role::Developer);
        deploy(&g, &dev, true);
        let resp = g
            .invoke(
                &dev,
                "qiskit-qrng",
                InvocationRequest {
                    input: json!(4),
                    shots: Some(1024),
                    backend_name: Some("local-sv".into()),
                    ..Default::default()
                },
            )
            .unwrap();
        let v = resp.data.as_u64().unwrap();
        assert!(v < 16);
        let total: u64 = resp.details["counts"].as_object().unwrap().values().map(|c| c.as_u64().unwrap()).sum();
        assert_eq!(total, 1024);
        assert_eq!(g.metrics.invocations.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn error_mapping() {
        let g = gateway();
        let dev = User::ephemeral("dev", Role::Developer);
        let other = User::ephemeral("eve", Role::Enduser);
        assert_eq!(g.invoke(&dev, "qiskit-none", InvocationRequest::default()).unwrap_err().status, 404);
        deploy(&g, &dev, false);
        assert_eq!(g.invoke(&other, "qiskit-qrng", InvocationRequest::default()).unwrap_err().status, 403);
        let range = g
            .invoke(&dev, "qiskit-qrng", InvocationRequest { input: json!(25), ..Default::default() })
            .unwrap_err();
        assert_eq!(range.status, 422);
        assert_eq!(range.details["kind"], "range_violation");
        let manual = InvocationRequest {
            auto_select: false,
            ..Default::default()
        };
        assert_eq!(g.invoke(&dev, "qiskit-qrng", manual).unwrap_err().status, 422);
        let pp = InvocationRequest {
            post_process_only: true,
            ..Default::default()
        };
        assert_eq!(g.invoke(&dev, "qiskit-qrng", pp).unwrap_err().status, 422);
        let none = InvocationRequest {
            backend_type: Some(BackendKind::Qpu),
            input: json!(8),
            ..Default::default()
        };
        assert_eq!(g.invoke(&dev, "qiskit-qrng", none).unwrap_err().status, 503);
    }

    #[test]
    fn post_process_only_reuses_counts() {
        let g = gateway();
        let dev = User::ephemeral("dev", Role::Developer);
        deploy(&g, &dev, true);
        let job = g
            .jobs
            .create(NewJob {
                function_identifier: "qiskit-qrng".into(),
                owner: "dev".into(),
                backend_name: "local-sv".into(),
                provider: "local".into(),
                shots: 100,
                seed: 0,
                bindings: [("n".to_string(), 2)].into_iter().collect(),
            })
            .unwrap();
        g.jobs.transition(&job.job_id, JobStatus::Queued, Payload::None).unwrap();
        g.jobs.transition(&job.job_id, JobStatus::Running, Payload::None).unwrap();
        let counts = [("11".to_string(), 70), ("01".to_string(), 30)].into_iter().collect();
        g.jobs
            .transition(&job.job_id, JobStatus::Completed, Payload::Result { counts, data: json!(null) })
            .unwrap();
        let resp = g
            .invoke(
                &dev,
                "qiskit-qrng",
                InvocationRequest {
                    post_process_only: true,
                    job_id: Some(job.job_id.clone()),
                    ..Default::default()
                },
            )
            .unwrap();
        assert_eq!(resp.data, json!(3));
    }

    #[test]
    fn request_schema_rejects_unknown_fields() {
        assert!(serde_json::from_str::<InvocationRequest>(r#"{"input":1,"bogus":true}"#).is_err());
        let r: InvocationRequest = serde_json::from_str(r#"{"input":1}"#).unwrap();
        assert!(r.wait_for_result && r.auto_select && !r.post_process_only);
    }
}
