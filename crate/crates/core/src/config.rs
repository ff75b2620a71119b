//! Gateway configuration: a TOML file plus `QFAAS_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::DEFAULT_TOKEN_TTL_SECS;
use crate::jobstore::DEFAULT_THRESHOLD_MS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    /// `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// Backend catalog JSON; the built-in catalog is used when unset.
    pub catalog: Option<PathBuf>,
    pub sim_workers: usize,
    pub max_in_flight: usize,
    pub max_qubits: usize,
    pub threshold_ms: u64,
    pub token_ttl_secs: u64,
    pub default_shots: u64,
    /// Static dashboard files served under `/ui/`.
    pub ui_dir: Option<PathBuf>,
    /// fsync every record write.
    pub durable: bool,
    /// Password for the seeded `admin` account on first boot.
    pub admin_password: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: Some(PathBuf::from("data")),
            catalog: None,
            sim_workers: std::thread::available_parallelism().map_or(2, |n| n.get()).clamp(2, 8),
            max_in_flight: 64,
            max_qubits: crate::simulator::DEFAULT_MAX_QUBITS,
            threshold_ms: DEFAULT_THRESHOLD_MS,
            token_ttl_secs: DEFAULT_TOKEN_TTL_SECS,
            default_shots: 1024,
            ui_dir: None,
            durable: true,
            admin_password: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {var}: {message}")]
    Env { var: String, message: String },
}

impl Config {
    /// An in-memory configuration suited to tests.
    pub fn ephemeral() -> Self {
        Self {
            data_dir: None,
            durable: false,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Applies overrides from `lookup` (normally `std::env::var`).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(var: &str, raw: String) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            raw.trim().parse().map_err(|e: T::Err| ConfigError::Env {
                var: var.to_string(),
                message: e.to_string(),
            })
        }
        if let Some(v) = lookup("QFAAS_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = lookup("QFAAS_DATA_DIR") {
            self.data_dir = if v.is_empty() { None } else { Some(v.into()) };
        }
        if let Some(v) = lookup("QFAAS_CATALOG") {
            self.catalog = Some(v.into());
        }
        if let Some(v) = lookup("QFAAS_UI_DIR") {
            self.ui_dir = Some(v.into());
        }
        if let Some(v) = lookup("QFAAS_SIM_WORKERS") {
            self.sim_workers = num("QFAAS_SIM_WORKERS", v)?;
        }
        if let Some(v) = lookup("QFAAS_MAX_IN_FLIGHT") {
            self.max_in_flight = num("QFAAS_MAX_IN_FLIGHT", v)?;
        }
        if let Some(v) = lookup("QFAAS_THRESHOLD_MS") {
            self.threshold_ms = num("QFAAS_THRESHOLD_MS", v)?;
        }
        if let Some(v) = lookup("QFAAS_TOKEN_TTL") {
            self.token_ttl_secs = num("QFAAS_TOKEN_TTL", v)?;
        }
        if let Some(v) = lookup("QFAAS_ADMIN_PASSWORD") {
            self.admin_password = Some(v);
        }
        Ok(())
    }
}
