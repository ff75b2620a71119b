//! Backend selection: filter the catalog for a circuit, then pick the least
//! busy device, preferring the smallest one that fits.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::Role;
use crate::circuit::CircuitStats;
use crate::providers::{BackendInfo, BackendKind, ProviderCatalog, VerifyError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCriteria {
    pub provider: Option<String>,
    pub backend_type: Option<BackendKind>,
    /// When set the choice is manual, whatever `auto_select` says.
    pub backend_name: Option<String>,
    pub auto_select: bool,
}

impl SelectionCriteria {
    pub fn auto() -> Self {
        Self {
            auto_select: true,
            ..Self::default()
        }
    }

    pub fn manual(backend: &str) -> Self {
        Self {
            backend_name: Some(backend.to_string()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub backend: BackendInfo,
    pub estimated_wait_seconds: f64,
    pub reason: String,
}

/// Why one backend was not eligible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    NotOperational,
    RoleNotPermitted { role: Role },
    InsufficientQubits { available: usize, required: usize },
    KindMismatch { kind: BackendKind, wanted: BackendKind },
    ProviderMismatch { provider: String, wanted: String },
    NameMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRejection {
    pub backend: String,
    #[serde(flatten)]
    pub rejection: Rejection,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectError {
    #[error("no eligible backend")]
    NoEligibleBackend(Vec<BackendRejection>),
    #[error("a backend name is required when automatic selection is off")]
    BackendNameRequired,
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// All reasons `b` fails the criteria; empty when eligible.
pub fn rejections(b: &BackendInfo, role: Role, stats: &CircuitStats, criteria: &SelectionCriteria) -> Vec<Rejection> {
    let mut out = Vec::new();
    if !b.operational {
        out.push(Rejection::NotOperational);
    }
    if !b.permits(role) {
        out.push(Rejection::RoleNotPermitted { role });
    }
    if b.qubits < stats.width {
        out.push(Rejection::InsufficientQubits {
            available: b.qubits,
            required: stats.width,
        });
    }
    if let Some(wanted) = criteria.backend_type {
        if b.kind != wanted {
            out.push(Rejection::KindMismatch { kind: b.kind, wanted });
        }
    }
    if let Some(wanted) = &criteria.provider {
        if &b.provider != wanted {
            out.push(Rejection::ProviderMismatch {
                provider: b.provider.clone(),
                wanted: wanted.clone(),
            });
        }
    }
    if criteria.backend_name.as_ref().is_some_and(|n| n != &b.name) {
        out.push(Rejection::NameMismatch);
    }
    out
}

pub fn eligible(catalog: &ProviderCatalog, role: Role, stats: &CircuitStats, criteria: &SelectionCriteria) -> Vec<BackendInfo> {
    catalog
        .backends
        .iter()
        .filter(|b| rejections(b, role, stats, criteria).is_empty())
        .cloned()
        .collect()
}

/// Ranking key: estimated wait, then qubit count, then name.
pub fn compare(a: &BackendInfo, b: &BackendInfo) -> Ordering {
    a.estimated_wait_seconds()
        .total_cmp(&b.estimated_wait_seconds())
        .then(a.qubits.cmp(&b.qubits))
        .then_with(|| a.name.cmp(&b.name))
}

pub fn select(
    catalog: &ProviderCatalog,
    role: Role,
    stats: &CircuitStats,
    criteria: &SelectionCriteria,
) -> Result<SelectionDecision, SelectError> {
    if let Some(name) = &criteria.backend_name {
        let backend = catalog.verify(role, name, stats)?;
        return Ok(SelectionDecision {
            estimated_wait_seconds: backend.estimated_wait_seconds(),
            reason: format!("backend `{name}` requested explicitly"),
            backend,
        });
    }
    if !criteria.auto_select {
        return Err(SelectError::BackendNameRequired);
    }
    let pool = eligible(catalog, role, stats, criteria);
    let Some(best) = pool.iter().min_by(|a, b| compare(a, b)) else {
        let reasons = catalog
            .backends
            .iter()
            .flat_map(|b| {
                rejections(b, role, stats, criteria)
                    .into_iter()
                    .map(|rejection| BackendRejection {
                        backend: b.name.clone(),
                        rejection,
                    })
            })
            .collect();
        return Err(SelectError::NoEligibleBackend(reasons));
    };
    let reason = if pool.len() == 1 {
        "only eligible backend".to_string()
    } else {
        let runner_up = pool
            .iter()
            .filter(|b| b.name != best.name)
            .min_by(|a, b| compare(a, b))
            .expect("at least two candidates");
        if best.estimated_wait_seconds() < runner_up.estimated_wait_seconds() {
            format!(
                "shortest estimated wait ({:.1} s) among {} eligible backends",
                best.estimated_wait_seconds(),
                pool.len()
            )
        } else if best.qubits < runner_up.qubits {
            format!("smallest sufficient device ({} qubits) at equal wait", best.qubits)
        } else {
            "name order among otherwise equal backends".to_string()
        }
    };
    Ok(SelectionDecision {
        estimated_wait_seconds: best.estimated_wait_seconds(),
        backend: best.clone(),
        reason,
    })
}
