//! TOML experiment files.
//!
//! ```toml
//! [experiment]
//! n_users = [5, 10, 15, 20]
//! schedulers = ["rr", "pf"]
//! connectivity = ["single", "dual"]
//! traffic = ["vr", "traditional"]
//! seeds = [1, 2, 3]           # or: n_seeds = 10  (seeds 1..=10)
//! output = "fig3.csv"
//! # per_run_output = "fig3-runs.csv"
//! # [[experiment.curves]] overrides the product of the three lists above
//!
//! [sim]        # duration_s, warmup_s
//! [scenario]   # map = "campus" | "<path>", base_stations = [[x, y], ...],
//!              # bs_height_m, user_height_m
//! [channel]    # see ChannelConfig
//! [scheduler]  # tti_s, pf_time_constant_ttis
//! [traffic.vr] # bit_rate_bps, refresh_hz, bitplane_bits, deadline_ms,
//!              # prefetch_ms, drop_on_expiry; same for [traffic.traditional]
//! ```
//!
//! Every key is optional. Relative map paths resolve against the directory
//! of the config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{ConfigError, Curve, ExperimentSpec, MapSource};
use crate::channel::ChannelConfig;
use crate::engine::{Site, SimConfig, DEFAULT_BS_HEIGHT_M, DEFAULT_DURATION_S, DEFAULT_USER_HEIGHT_M, DEFAULT_WARMUP_S};
use crate::geometry::{campus_map, read_map, CAMPUS_BASE_STATIONS};
use crate::scheduler::{Connectivity, Discipline, SchedulerConfig};
use crate::traffic::{FlowConfig, TrafficKind};
use crate::{Error, Position};

const DEFAULT_N_USERS: [usize; 4] = [5, 10, 15, 20];
const DEFAULT_N_SEEDS: u64 = 10;
const DEFAULT_OUTPUT: &str = "results.csv";

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawFile {
    experiment: RawExperiment,
    sim: RawSim,
    scenario: RawScenario,
    channel: ChannelConfig,
    scheduler: RawScheduler,
    traffic: RawTraffic,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawExperiment {
    n_users: Option<Vec<usize>>,
    schedulers: Option<Vec<Discipline>>,
    connectivity: Option<Vec<Connectivity>>,
    traffic: Option<Vec<TrafficKind>>,
    seeds: Option<Vec<u64>>,
    n_seeds: Option<u64>,
    output: Option<PathBuf>,
    per_run_output: Option<PathBuf>,
    curves: Option<Vec<Curve>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawSim {
    duration_s: Option<f64>,
    warmup_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawScenario {
    map: Option<String>,
    base_stations: Option<Vec<[f64; 2]>>,
    bs_height_m: Option<f64>,
    user_height_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawScheduler {
    tti_s: Option<f64>,
    pf_time_constant_ttis: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawTraffic {
    vr: RawFlow,
    #[serde(alias = "traditional_video")]
    traditional: RawFlow,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawFlow {
    bit_rate_bps: Option<f64>,
    refresh_hz: Option<f64>,
    bitplane_bits: Option<u64>,
    deadline_ms: Option<f64>,
    prefetch_ms: Option<f64>,
    drop_on_expiry: Option<bool>,
}

impl RawFlow {
    fn apply(self, mut f: FlowConfig) -> FlowConfig {
        f.bit_rate_bps = self.bit_rate_bps.unwrap_or(f.bit_rate_bps);
        f.refresh_hz = self.refresh_hz.unwrap_or(f.refresh_hz);
        f.bitplane_bits = self.bitplane_bits.unwrap_or(f.bitplane_bits);
        f.deadline_ms = self.deadline_ms.unwrap_or(f.deadline_ms);
        f.prefetch_ms = self.prefetch_ms.unwrap_or(f.prefetch_ms);
        f.drop_on_expiry = self.drop_on_expiry.unwrap_or(f.drop_on_expiry);
        f
    }
}

/// Reads and validates an experiment file.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            ConfigError::Missing { path: path.to_path_buf() }
        } else {
            ConfigError::Read { path: path.to_path_buf(), source }
        }
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_with(&text, path, dir)
}

/// Parses config text; relative map paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentSpec, ConfigError> {
    parse_with(text, Path::new("<string>"), base_dir)
}

fn parse_with(text: &str, path: &Path, base_dir: &Path) -> Result<ExperimentSpec, ConfigError> {
    let de = toml::Deserializer::new(text);
    let mut unknown = Vec::new();
    let raw: RawFile = serde_ignored::deserialize(de, |p| unknown.push(p.to_string()))
        .map_err(|e| ConfigError::Syntax { path: path.to_path_buf(), message: e.to_string().trim_end().to_string() })?;
    if let Some(key) = unknown.into_iter().next() {
        return Err(ConfigError::UnknownKey { key });
    }
    let spec = build(raw, base_dir)?;
    validate_spec(&spec)?;
    Ok(spec)
}

fn build(raw: RawFile, base_dir: &Path) -> Result<ExperimentSpec, ConfigError> {
    let e = raw.experiment;

    let seeds = match (e.seeds, e.n_seeds) {
        (Some(_), Some(_)) => return Err(ConfigError::invalid("experiment.seeds", "give either seeds or n_seeds, not both")),
        (Some(s), None) => s,
        (None, Some(n)) => (1..=n).collect(),
        (None, None) => (1..=DEFAULT_N_SEEDS).collect(),
    };

    let curves = match e.curves {
        Some(c) => {
            if e.schedulers.is_some() || e.connectivity.is_some() || e.traffic.is_some() {
                return Err(ConfigError::invalid(
                    "experiment.curves",
                    "explicit curves cannot be combined with schedulers/connectivity/traffic lists",
                ));
            }
            c
        }
        None => {
            let schedulers = e.schedulers.unwrap_or_else(|| vec![Discipline::RoundRobin, Discipline::ProportionalFair]);
            let connectivity = e.connectivity.unwrap_or_else(|| vec![Connectivity::Single, Connectivity::Dual]);
            let traffic = e.traffic.unwrap_or_else(|| vec![TrafficKind::Vr, TrafficKind::TraditionalVideo]);
            for (key, empty) in [
                ("experiment.schedulers", schedulers.is_empty()),
                ("experiment.connectivity", connectivity.is_empty()),
                ("experiment.traffic", traffic.is_empty()),
            ] {
                if empty {
                    return Err(ConfigError::invalid(key, "list must not be empty"));
                }
            }
            let mut out = Vec::new();
            for &scheduler in &schedulers {
                for &connectivity in &connectivity {
                    for &traffic in &traffic {
                        out.push(Curve { scheduler, connectivity, traffic });
                    }
                }
            }
            out
        }
    };

    let sc = raw.scenario;
    let bs_height = sc.bs_height_m.unwrap_or(DEFAULT_BS_HEIGHT_M);
    let user_height = sc.user_height_m.unwrap_or(DEFAULT_USER_HEIGHT_M);
    for (key, h) in [("scenario.bs_height_m", bs_height), ("scenario.user_height_m", user_height)] {
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConfigError::invalid(key, "height must be positive"));
        }
    }
    let (map, map_source) = match sc.map.as_deref() {
        None | Some("campus") => (campus_map(), MapSource::Campus),
        Some(p) => {
            let path = base_dir.join(p);
            let map = read_map(&path).map_err(|err| ConfigError::invalid("scenario.map", err.to_string()))?;
            (map, MapSource::File(path))
        }
    };
    let bs_xy: Vec<[f64; 2]> = match (sc.base_stations, &map_source) {
        (Some(b), _) => b,
        (None, MapSource::Campus) => CAMPUS_BASE_STATIONS.iter().map(|&(x, y)| [x, y]).collect(),
        (None, MapSource::File(_)) => {
            return Err(ConfigError::invalid("scenario.base_stations", "required when a custom map is used"));
        }
    };
    let site = Site {
        map,
        base_stations: bs_xy.iter().map(|&[x, y]| Position::new(x, y, bs_height)).collect(),
        user_height_m: user_height,
    };

    let defaults = SchedulerConfig::default();
    let scheduler = SchedulerConfig {
        tti_s: raw.scheduler.tti_s.unwrap_or(defaults.tti_s),
        pf_time_constant_ttis: raw.scheduler.pf_time_constant_ttis.unwrap_or(defaults.pf_time_constant_ttis),
        ..defaults
    };

    let vr_flow = raw.traffic.vr.apply(FlowConfig::vr());
    let traditional_flow = raw.traffic.traditional.apply(FlowConfig::traditional());

    let base = SimConfig {
        duration_s: raw.sim.duration_s.unwrap_or(DEFAULT_DURATION_S),
        warmup_s: raw.sim.warmup_s.unwrap_or(DEFAULT_WARMUP_S),
        seed: 0,
        n_users: 0,
        site,
        channel: raw.channel,
        scheduler,
        flow: vr_flow.clone(),
    };

    Ok(ExperimentSpec {
        n_users: e.n_users.unwrap_or_else(|| DEFAULT_N_USERS.to_vec()),
        curves,
        seeds,
        output: e.output.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        per_run_output: e.per_run_output,
        base,
        vr_flow,
        traditional_flow,
        map_source,
    })
}

/// Config key of a field named in an engine validation error.
fn qualify(name: &str) -> String {
    let section = match name {
        "duration_s" | "warmup_s" => "sim",
        "base_stations" => "scenario",
        "tti_s" | "pf_time_constant_ttis" => "scheduler",
        "connectivity" => "experiment",
        _ => "channel",
    };
    format!("{section}.{name}")
}

fn from_engine(err: Error, qualify: impl Fn(&str) -> String) -> ConfigError {
    match err {
        Error::InvalidArgument { name, reason } => ConfigError::Invalid { key: qualify(name), reason },
        other => ConfigError::invalid("config", other.to_string()),
    }
}

pub(super) fn validate_spec(spec: &ExperimentSpec) -> Result<(), ConfigError> {
    for (key, empty) in [
        ("experiment.n_users", spec.n_users.is_empty()),
        ("experiment.curves", spec.curves.is_empty()),
        ("experiment.seeds", spec.seeds.is_empty()),
    ] {
        if empty {
            return Err(ConfigError::invalid(key, "list must not be empty"));
        }
    }
    let mut seen = HashSet::new();
    if !spec.n_users.iter().all(|n| seen.insert(*n)) {
        return Err(ConfigError::invalid("experiment.n_users", "duplicate entry"));
    }
    let mut seen = HashSet::new();
    if !spec.seeds.iter().all(|s| seen.insert(*s)) {
        return Err(ConfigError::invalid("experiment.seeds", "duplicate seed"));
    }
    let mut seen = HashSet::new();
    if !spec.curves.iter().all(|c| seen.insert(*c)) {
        return Err(ConfigError::invalid("experiment.curves", "duplicate curve"));
    }
    if spec.output.as_os_str().is_empty() || spec.output.is_dir() {
        return Err(ConfigError::invalid("experiment.output", "must name a file"));
    }
    if let Some(p) = &spec.per_run_output {
        if p.as_os_str().is_empty() || p.is_dir() || *p == spec.output {
            return Err(ConfigError::invalid("experiment.per_run_output", "must name a file distinct from output"));
        }
    }
    for (kind, flow) in [("vr", &spec.vr_flow), ("traditional", &spec.traditional_flow)] {
        if flow.kind.label() != kind {
            return Err(ConfigError::invalid(format!("traffic.{kind}"), "flow kind mismatch"));
        }
        flow.validate().map_err(|e| from_engine(e, |n| format!("traffic.{kind}.{n}")))?;
    }
    for curve in &spec.curves {
        spec.sim_config(curve, spec.n_users[0], spec.seeds[0]).validate().map_err(|e| from_engine(e, qualify))?;
    }
    Ok(())
}
