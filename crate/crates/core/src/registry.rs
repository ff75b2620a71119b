//! Function records and the validate → build → deploy pipeline.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::{Role, User};
use crate::qdsl::{self, Bindings, FunctionDef, Template};
use crate::storage::{RecordDir, StorageError};

pub const FUNCTION_SCHEMA: &str = "qfaas.function.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionStatus {
    Registered,
    Validating,
    Building,
    Deploying,
    Ready,
    FailedDeploy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Validate,
    Build,
    Deploy,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Validate, Stage::Build, Stage::Deploy];

    fn status(self) -> FunctionStatus {
        match self {
            Stage::Validate => FunctionStatus::Validating,
            Stage::Build => FunctionStatus::Building,
            Stage::Deploy => FunctionStatus::Deploying,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pending,
    Running,
    Passed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub log: String,
    pub at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentRecord {
    pub identifier: String,
    pub version: u64,
    pub stages: Vec<StageRecord>,
}

impl DeploymentRecord {
    fn pending(identifier: &str, version: u64) -> Self {
        Self {
            identifier: identifier.to_string(),
            version,
            stages: Stage::ALL
                .into_iter()
                .map(|stage| StageRecord {
                    stage,
                    status: StageStatus::Pending,
                    log: String::new(),
                    at: None,
                })
                .collect(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Passed)
    }

    pub fn failed(&self) -> bool {
        self.stages.iter().any(|s| s.status == StageStatus::Failed)
    }

    pub fn stage(&self, stage: Stage) -> &StageRecord {
        self.stages.iter().find(|s| s.stage == stage).expect("every stage is present")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub identifier: String,
    pub name: String,
    pub template: Template,
    pub author: String,
    pub public: bool,
    pub source_b64: String,
    pub requirements_b64: String,
    pub handler_qs_b64: String,
    pub version: u64,
    /// Present iff `status` is `Ready`.
    pub compiled: Option<FunctionDef>,
    pub status: FunctionStatus,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl FunctionRecord {
    pub fn source(&self) -> Result<String, RegistryError> {
        decode_b64("handlerPy", &self.source_b64)
    }

    pub fn is_ready(&self) -> bool {
        self.status == FunctionStatus::Ready
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionEntry {
    pub version: u64,
    pub source_b64: String,
    pub requirements_b64: String,
    pub handler_qs_b64: String,
    pub public: bool,
    pub at: DateTime<Utc>,
}

/// Function code objects, each Base64 encoded. `handlerPy` carries the DSL
/// source; the other two are stored verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnCode {
    pub requirements: String,
    #[serde(rename = "handlerPy")]
    pub handler_py: String,
    #[serde(rename = "handlerQs")]
    pub handler_qs: String,
}

impl FnCode {
    pub fn from_source(source: &str) -> Self {
        Self {
            requirements: String::new(),
            handler_py: B64.encode(source),
            handler_qs: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateFunction {
    pub name: String,
    pub template: String,
    #[serde(rename = "fnCode")]
    pub fn_code: FnCode,
    pub public: bool,
    #[serde(default)]
    pub author: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateFunction {
    #[serde(rename = "fnCode", default)]
    pub fn_code: Option<FnCode>,
    #[serde(default)]
    pub public: Option<bool>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("function `{0}` already exists")]
    Conflict(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    PermissionDenied(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

fn decode_b64(field: &str, text: &str) -> Result<String, RegistryError> {
    let bytes = B64
        .decode(text.trim())
        .map_err(|e| RegistryError::Validation(format!("`{field}` is not valid Base64: {e}")))?;
    String::from_utf8(bytes).map_err(|_| RegistryError::Validation(format!("`{field}` is not UTF-8 text")))
}

/// `[a-z][a-z0-9-]{0,62}`
pub fn valid_function_name(name: &str) -> bool {
    let b = name.as_bytes();
    !b.is_empty()
        && b.len() <= 63
        && b[0].is_ascii_lowercase()
        && b.iter().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == b'-')
}

pub fn identifier(template: Template, name: &str) -> String {
    format!("{template}-{name}")
}

/// Parameter values used for the smoke build: default, else min, else max,
/// else 1.
pub fn smoke_bindings(def: &FunctionDef) -> Bindings {
    def.params
        .iter()
        .map(|p| (p.name.clone(), p.default.or(p.min).or(p.max).unwrap_or(1)))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    record: FunctionRecord,
    history: Vec<VersionEntry>,
    deployments: Vec<DeploymentRecord>,
}

/// How deployments triggered by create/update are run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    /// Before create/update returns.
    Inline,
    /// On a background thread; create/update return immediately.
    Background,
}

struct Inner {
    entries: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    store: RecordDir,
    mode: PipelineMode,
}

#[derive(Clone)]
pub struct Registry {
    inner: Arc<Inner>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry").field("mode", &self.inner.mode).finish()
    }
}

fn can_manage(user: &User, record: &FunctionRecord) -> bool {
    user.is_admin() || user.username == record.author
}

/// Whether `user` may see `record` at all.
pub fn can_view(user: &User, record: &FunctionRecord) -> bool {
    record.public || can_manage(user, record)
}

impl Registry {
    pub fn open(store: RecordDir, mode: PipelineMode) -> Result<Self, RegistryError> {
        let entries = store
            .load_all::<Entry>()?
            .into_iter()
            .map(|e| (e.record.identifier.clone(), Arc::new(Mutex::new(e))))
            .collect();
        Ok(Self {
            inner: Arc::new(Inner {
                entries: RwLock::new(entries),
                store,
                mode,
            }),
        })
    }

    pub fn in_memory(mode: PipelineMode) -> Self {
        Self::open(RecordDir::in_memory(FUNCTION_SCHEMA), mode).expect("in-memory store cannot fail")
    }

    fn entry(&self, identifier: &str) -> Result<Arc<Mutex<Entry>>, RegistryError> {
        self.inner
            .entries
            .read()
            .get(identifier)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownFunction(identifier.to_string()))
    }

    fn persist(&self, entry: &Entry) -> Result<(), RegistryError> {
        Ok(self.inner.store.write(&entry.record.identifier, entry)?)
    }

    pub fn create_function(&self, req: CreateFunction, caller: &User) -> Result<(FunctionRecord, DeploymentRecord), RegistryError> {
        if caller.role == Role::Enduser {
            return Err(RegistryError::PermissionDenied("end users cannot deploy functions".into()));
        }
        if !valid_function_name(&req.name) {
            return Err(RegistryError::Validation(format!(
                "function name `{}` must match [a-z][a-z0-9-]{{0,62}}",
                req.name
            )));
        }
        let template: Template = req.template.parse().map_err(RegistryError::Validation)?;
        decode_b64("handlerPy", &req.fn_code.handler_py)?;
        decode_b64("requirements", &req.fn_code.requirements)?;
        decode_b64("handlerQs", &req.fn_code.handler_qs)?;
        let author = match req.author {
            Some(a) if a != caller.username && !caller.is_admin() => {
                return Err(RegistryError::PermissionDenied(
                    "only admins may create functions for another author".into(),
                ))
            }
            Some(a) => a,
            None => caller.username.clone(),
        };

        let id = identifier(template, &req.name);
        let now = Utc::now();
        let record = FunctionRecord {
            identifier: id.clone(),
            name: req.name,
            template,
            author,
            public: req.public,
            source_b64: req.fn_code.handler_py,
            requirements_b64: req.fn_code.requirements,
            handler_qs_b64: req.fn_code.handler_qs,
            version: 1,
            compiled: None,
            status: FunctionStatus::Registered,
            created_at: now,
            updated_at: now,
        };
        let deployment = DeploymentRecord::pending(&id, 1);
        let entry = Entry {
            history: vec![VersionEntry {
                version: 1,
                source_b64: record.source_b64.clone(),
                requirements_b64: record.requirements_b64.clone(),
                handler_qs_b64: record.handler_qs_b64.clone(),
                public: record.public,
                at: now,
            }],
            deployments: vec![deployment.clone()],
            record: record.clone(),
        };
        {
            let mut entries = self.inner.entries.write();
            if entries.contains_key(&id) {
                return Err(RegistryError::Conflict(id));
            }
            self.persist(&entry)?;
            entries.insert(id.clone(), Arc::new(Mutex::new(entry)));
        }
        self.trigger(&id, 1)?;
        Ok((record, deployment))
    }

    pub fn update_function(&self, identifier: &str, req: UpdateFunction, caller: &User) -> Result<(FunctionRecord, DeploymentRecord), RegistryError> {
        if let Some(code) = &req.fn_code {
            decode_b64("handlerPy", &code.handler_py)?;
            decode_b64("requirements", &code.requirements)?;
            decode_b64("handlerQs", &code.handler_qs)?;
        }
        let slot = self.entry(identifier)?;
        let (record, deployment) = {
            let mut entry = slot.lock();
            if !can_manage(caller, &entry.record) {
                return Err(RegistryError::PermissionDenied(format!(
                    "only the author or an admin may update `{identifier}`"
                )));
            }
            let mut next = entry.clone();
            let now = Utc::now();
            let r = &mut next.record;
            if let Some(code) = req.fn_code {
                r.source_b64 = code.handler_py;
                r.requirements_b64 = code.requirements;
                r.handler_qs_b64 = code.handler_qs;
            }
            if let Some(public) = req.public {
                r.public = public;
            }
            r.version += 1;
            r.compiled = None;
            r.status = FunctionStatus::Registered;
            r.updated_at = now;
            next.history.push(VersionEntry {
                version: r.version,
                source_b64: r.source_b64.clone(),
                requirements_b64: r.requirements_b64.clone(),
                handler_qs_b64: r.handler_qs_b64.clone(),
                public: r.public,
                at: now,
            });
            let deployment = DeploymentRecord::pending(identifier, r.version);
            next.deployments.push(deployment.clone());
            self.persist(&next)?;
            *entry = next;
            (entry.record.clone(), deployment)
        };
        self.trigger(identifier, record.version)?;
        Ok((record, deployment))
    }

    fn trigger(&self, identifier: &str, version: u64) -> Result<(), RegistryError> {
        match self.inner.mode {
            PipelineMode::Inline => {
                self.run_version(identifier, version)?;
            }
            PipelineMode::Background => {
                let this = self.clone();
                let id = identifier.to_string();
                std::thread::spawn(move || {
                    if let Err(e) = this.run_version(&id, version) {
                        tracing::warn!(function = %id, error = %e, "deployment pipeline failed to run");
                    }
                });
            }
        }
        Ok(())
    }

    /// Runs the pipeline for the current version and returns its record.
    pub fn run_pipeline(&self, identifier: &str) -> Result<DeploymentRecord, RegistryError> {
        let version = self.entry(identifier)?.lock().record.version;
        self.run_version(identifier, version)
    }

    /// Applies `f` to the entry if it still exists at `version`, persisting
    /// the change. Returns `None` when superseded or deleted.
    fn with_version<T>(&self, identifier: &str, version: u64, f: impl FnOnce(&mut Entry) -> T) -> Result<Option<T>, RegistryError> {
        let Ok(slot) = self.entry(identifier) else {
            return Ok(None);
        };
        let mut entry = slot.lock();
        if entry.record.version != version {
            return Ok(None);
        }
        let mut next = entry.clone();
        let out = f(&mut next);
        self.persist(&next)?;
        *entry = next;
        Ok(Some(out))
    }

    fn run_version(&self, identifier: &str, version: u64) -> Result<DeploymentRecord, RegistryError> {
        let mut source_b64 = None;
        let fresh = self.with_version(identifier, version, |e| {
            source_b64 = Some(e.record.source_b64.clone());
            let dep = e.deployments.iter_mut().rev().find(|d| d.version == version);
            if let Some(dep) = dep {
                *dep = DeploymentRecord::pending(identifier, version);
            } else {
                e.deployments.push(DeploymentRecord::pending(identifier, version));
            }
        })?;
        if fresh.is_none() {
            return self.deployment(identifier, version);
        }
        let source_b64 = source_b64.expect("set above");

        let mut compiled: Option<FunctionDef> = None;
        for stage in Stage::ALL {
            let started = self.with_version(identifier, version, |e| {
                e.record.status = stage.status();
                e.record.updated_at = Utc::now();
                let dep = last_deployment(e, version);
                let s = dep.stages.iter_mut().find(|s| s.stage == stage).expect("stage");
                s.status = StageStatus::Running;
                s.at = Some(Utc::now());
            })?;
            if started.is_none() {
                break;
            }
            let outcome: Result<String, String> = match stage {
                Stage::Validate => decode_b64("handlerPy", &source_b64)
                    .map_err(|e| e.to_string())
                    .and_then(|src| qdsl::parse(&src).map_err(|e| e.to_string()))
                    .map(|def| {
                        let log = format!(
                            "parsed `{}`: {} parameter(s), {} post step(s)",
                            def.name,
                            def.params.len(),
                            def.post_pipeline.len()
                        );
                        compiled = Some(def);
                        log
                    }),
                Stage::Build => {
                    let def = compiled.as_ref().expect("validated");
                    let bindings = smoke_bindings(def);
                    qdsl::instantiate(def, &bindings)
                        .map_err(|e| format!("smoke build with {bindings:?} failed: {e}"))
                        .and_then(|c| c.stats().map_err(|e| e.to_string()))
                        .map(|s| {
                            format!(
                                "built with {bindings:?}: width {}, {} gates, depth {}",
                                s.width, s.gate_count, s.depth
                            )
                        })
                }
                Stage::Deploy => Ok(format!("route /api/function/{identifier} published")),
            };
            let passed = outcome.is_ok();
            let def = compiled.clone();
            let applied = self.with_version(identifier, version, |e| {
                let now = Utc::now();
                let dep = last_deployment(e, version);
                let s = dep.stages.iter_mut().find(|s| s.stage == stage).expect("stage");
                s.at = Some(now);
                match outcome {
                    Ok(log) => {
                        s.status = StageStatus::Passed;
                        s.log = log;
                    }
                    Err(log) => {
                        s.status = StageStatus::Failed;
                        s.log = log;
                    }
                }
                e.record.updated_at = now;
                if !passed {
                    e.record.status = FunctionStatus::FailedDeploy;
                    e.record.compiled = None;
                } else if stage == Stage::Deploy {
                    e.record.status = FunctionStatus::Ready;
                    e.record.compiled = def;
                }
            })?;
            if applied.is_none() || !passed {
                break;
            }
        }
        self.deployment(identifier, version)
    }

    fn deployment(&self, identifier: &str, version: u64) -> Result<DeploymentRecord, RegistryError> {
        let slot = self.entry(identifier)?;
        let entry = slot.lock();
        entry
            .deployments
            .iter()
            .rev()
            .find(|d| d.version == version)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownFunction(identifier.to_string()))
    }

    /// Raw lookup without permission checks.
    pub fn get(&self, identifier: &str) -> Result<FunctionRecord, RegistryError> {
        Ok(self.entry(identifier)?.lock().record.clone())
    }

    pub fn get_as(&self, identifier: &str, caller: &User) -> Result<FunctionRecord, RegistryError> {
        let record = self.get(identifier)?;
        if !can_view(caller, &record) {
            return Err(RegistryError::PermissionDenied(format!("function `{identifier}` is private")));
        }
        Ok(record)
    }

    /// Admins see everything; everyone else sees their own functions plus
    /// public functions that are ready.
    pub fn list(&self, caller: &User) -> Vec<FunctionRecord> {
        let slots: Vec<_> = self.inner.entries.read().values().cloned().collect();
        let mut out: Vec<FunctionRecord> = slots
            .iter()
            .map(|s| s.lock().record.clone())
            .filter(|r| caller.is_admin() || r.author == caller.username || (r.public && r.is_ready()))
            .collect();
        out.sort_by(|a, b| a.identifier.cmp(&b.identifier));
        out
    }

    pub fn delete(&self, identifier: &str, caller: &User) -> Result<FunctionRecord, RegistryError> {
        let slot = self.entry(identifier)?;
        let record = slot.lock().record.clone();
        if !can_manage(caller, &record) {
            return Err(RegistryError::PermissionDenied(format!(
                "only the author or an admin may delete `{identifier}`"
            )));
        }
        let mut entries = self.inner.entries.write();
        self.inner.store.remove(identifier)?;
        entries.remove(identifier);
        Ok(record)
    }

    pub fn deployments(&self, identifier: &str, caller: &User) -> Result<Vec<DeploymentRecord>, RegistryError> {
        let slot = self.entry(identifier)?;
        let entry = slot.lock();
        if !can_view(caller, &entry.record) {
            return Err(RegistryError::PermissionDenied(format!("function `{identifier}` is private")));
        }
        Ok(entry.deployments.clone())
    }

    pub fn history(&self, identifier: &str) -> Result<Vec<VersionEntry>, RegistryError> {
        Ok(self.entry(identifier)?.lock().history.clone())
    }

    pub fn len(&self) -> usize {
        self.inner.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn last_deployment(e: &mut Entry, version: u64) -> &mut DeploymentRecord {
    e.deployments
        .iter_mut()
        .rev()
        .find(|d| d.version == version)
        .expect("deployment exists for version")
}
