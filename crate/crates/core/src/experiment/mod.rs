//! Experiment sweeps: configuration files, batch execution and CSV output.
//!
//! A sweep is a list of curves (scheduler, connectivity, traffic kind), each
//! evaluated at every user count and averaged over a list of seeds.

mod config;
mod runner;

use std::path::PathBuf;

use serde::Deserialize;

use crate::engine::SimConfig;
use crate::scheduler::{Connectivity, Discipline};
use crate::traffic::{FlowConfig, TrafficKind};

pub use config::{parse_config, parse_config_str};
pub use runner::{describe, emit_qos_table, fingerprint, run_experiment, PointResult, RunRecord, SweepResult};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file {} does not exist", path.display())]
    Missing { path: PathBuf },

    #[error("cannot read config file {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed config {}: {message}", path.display())]
    Syntax { path: PathBuf, message: String },

    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },

    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.into(), reason: reason.into() }
    }
}

/// One legend entry of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub scheduler: Discipline,
    pub connectivity: Connectivity,
    pub traffic: TrafficKind,
}

impl Curve {
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.scheduler.label(), self.connectivity.label(), self.traffic.label())
    }
}

/// Where the building map came from, for the output header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MapSource {
    Campus,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub n_users: Vec<usize>,
    /// Curves in output order.
    pub curves: Vec<Curve>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Optional per-seed detail CSV.
    pub per_run_output: Option<PathBuf>,
    /// Shared settings; `n_users`, `seed`, scheduler discipline, connectivity
    /// and flow are replaced per run.
    pub base: SimConfig,
    pub vr_flow: FlowConfig,
    pub traditional_flow: FlowConfig,
    pub map_source: MapSource,
}

impl ExperimentSpec {
    pub fn planned_runs(&self) -> usize {
        self.n_users.len() * self.curves.len() * self.seeds.len()
    }

    pub fn flow(&self, kind: TrafficKind) -> &FlowConfig {
        match kind {
            TrafficKind::Vr => &self.vr_flow,
            TrafficKind::TraditionalVideo => &self.traditional_flow,
        }
    }

    /// Fully resolved simulation input of one run.
    pub fn sim_config(&self, curve: &Curve, n_users: usize, seed: u64) -> SimConfig {
        let mut cfg = self.base.clone();
        cfg.n_users = n_users;
        cfg.seed = seed;
        cfg.scheduler.discipline = curve.scheduler;
        cfg.scheduler.connectivity = curve.connectivity;
        cfg.flow = self.flow(curve.traffic).clone();
        cfg
    }

    /// Re-checks every invariant; call after editing fields by hand.
    pub fn validate(&self) -> Result<(), ConfigError> {
        config::validate_spec(self)
    }
}
