use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::auth::Role;
use crate::circuit::CircuitStats;

use super::{CatalogError, VerifyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Qpu,
    Simulator,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Qpu => "qpu",
            BackendKind::Simulator => "simulator",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qpu" => Ok(BackendKind::Qpu),
            "simulator" => Ok(BackendKind::Simulator),
            _ => Err(format!("unknown backend type `{s}` (expected qpu or simulator)")),
        }
    }
}

fn all_roles() -> BTreeSet<Role> {
    Role::ALL.into_iter().collect()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub name: String,
    pub provider: String,
    pub kind: BackendKind,
    pub qubits: usize,
    #[serde(default = "default_true")]
    pub operational: bool,
    /// Jobs waiting at the backend. In a catalog file this is the standing
    /// load from outside this gateway; live snapshots add our in-flight jobs.
    #[serde(default)]
    pub queue_length: u64,
    #[serde(default)]
    pub avg_seconds_per_job: f64,
    #[serde(default)]
    pub readout_flip_p: f64,
    #[serde(default = "all_roles")]
    pub allowed_roles: BTreeSet<Role>,
}

impl BackendInfo {
    pub fn estimated_wait_seconds(&self) -> f64 {
        self.queue_length as f64 * self.avg_seconds_per_job
    }

    pub fn permits(&self, role: Role) -> bool {
        self.allowed_roles.contains(&role)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProviderCatalog {
    pub backends: Vec<BackendInfo>,
}

impl ProviderCatalog {
    /// Validates names, qubit counts and probabilities, then sorts by name.
    pub fn new(mut backends: Vec<BackendInfo>) -> Result<Self, CatalogError> {
        let mut seen = HashSet::new();
        for b in &backends {
            if b.name.is_empty() {
                return Err(CatalogError::Invalid("backend with empty name".into()));
            }
            if !seen.insert(b.name.as_str()) {
                return Err(CatalogError::Invalid(format!("duplicate backend `{}`", b.name)));
            }
            if b.qubits == 0 {
                return Err(CatalogError::Invalid(format!("backend `{}` has no qubits", b.name)));
            }
            if !(0.0..=1.0).contains(&b.readout_flip_p) {
                return Err(CatalogError::Invalid(format!(
                    "backend `{}` readout_flip_p {} outside [0, 1]",
                    b.name, b.readout_flip_p
                )));
            }
            if !b.avg_seconds_per_job.is_finite() || b.avg_seconds_per_job < 0.0 {
                return Err(CatalogError::Invalid(format!(
                    "backend `{}` avg_seconds_per_job must be a nonnegative number",
                    b.name
                )));
            }
        }
        backends.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Self { backends })
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let raw: ProviderCatalog =
            serde_json::from_str(text).map_err(|e| CatalogError::Invalid(e.to_string()))?;
        Self::new(raw.backends)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CatalogError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `local-sv`, `mock-braket-sv` and `mock-ibm-q5`.
    pub fn default_catalog() -> Self {
        let backend = |name: &str, provider: &str, kind, qubits, avg, p| BackendInfo {
            name: name.into(),
            provider: provider.into(),
            kind,
            qubits,
            operational: true,
            queue_length: 0,
            avg_seconds_per_job: avg,
            readout_flip_p: p,
            allowed_roles: all_roles(),
        };
        Self::new(vec![
            backend("local-sv", "local", BackendKind::Simulator, 24, 0.0, 0.0),
            backend("mock-ibm-q5", "mock-ibm", BackendKind::Qpu, 5, 2.0, 0.02),
            backend("mock-braket-sv", "mock-braket", BackendKind::Simulator, 20, 1.0, 0.0),
        ])
        .expect("default catalog is valid")
    }

    pub fn get(&self, name: &str) -> Option<&BackendInfo> {
        self.backends.iter().find(|b| b.name == name)
    }

    /// Checks that `name` exists, is up, admits `role` and is wide enough.
    /// Has no side effects.
    pub fn verify(&self, role: Role, name: &str, stats: &CircuitStats) -> Result<BackendInfo, VerifyError> {
        let b = self
            .get(name)
            .ok_or_else(|| VerifyError::UnknownBackend(name.to_string()))?;
        if !b.operational {
            return Err(VerifyError::BackendDown(name.to_string()));
        }
        if !b.permits(role) {
            return Err(VerifyError::PermissionDenied {
                backend: name.to_string(),
                role,
            });
        }
        if b.qubits < stats.width {
            return Err(VerifyError::InsufficientQubits {
                backend: name.to_string(),
                available: b.qubits,
                required: stats.width,
            });
        }
        Ok(b.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackendFilter {
    pub provider: Option<String>,
    pub kind: Option<BackendKind>,
    pub operational: Option<bool>,
}

impl BackendFilter {
    pub fn matches(&self, b: &BackendInfo) -> bool {
        self.provider.as_ref().is_none_or(|p| &b.provider == p)
            && self.kind.is_none_or(|k| b.kind == k)
            && self.operational.is_none_or(|o| b.operational == o)
    }
}
