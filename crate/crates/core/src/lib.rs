//! Quantum function-as-a-service engine.
//!
//! Functions are written in a small declarative language ([`qdsl`]), deployed
//! through the [`registry`], and invoked via the [`gateway`] service, which
//! picks a backend ([`selector`]), submits to a [`providers`] backend running
//! the state-vector [`simulator`], and tracks the run in the [`jobstore`].

pub mod auth;
pub mod circuit;
pub mod config;
pub mod gateway;
pub mod jobstore;
pub mod metrics;
pub mod providers;
pub mod qdsl;
pub mod registry;
pub mod selector;
pub mod simulator;
pub mod storage;
