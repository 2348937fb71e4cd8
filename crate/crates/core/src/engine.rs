//! Deterministic TTI-stepped simulation loop and delivery metrics.
//!
//! Every TTI proceeds in a fixed order:
//!
//! 1. frames whose availability time has passed are queued (one copy per
//!    serving base station and band);
//! 2. droppable copies past their deadline are removed;
//! 3. secondary-band copies skip planes the primary copy already delivered;
//! 4. the set of base stations with backlog on each band is fixed;
//! 5. rates are computed against that active set and every base station
//!    serves one user;
//! 6. completions are stamped at the end of the TTI.
//!
//! Primary-band copies are never cancelled, so the primary band evolves
//! exactly as it would without the secondary band.

use rayon::prelude::*;

use crate::channel::{db_to_linear, link_budget, shannon_rate_linear, ChannelConfig, LinkState};
use crate::geometry::{self, campus_map, campus_site, rank_bs};
use crate::rng::{self, Stream};
use crate::scheduler::{duplicate_for_dc, Band, BandScheduler, Connectivity, CopyEvent, FrameCopy, SchedulerConfig};
use crate::traffic::{Frame, FlowConfig};
use crate::{BuildingMap, Error, Position, Result};

/// Full five-minute session length, seconds.
pub const FULL_SESSION_S: f64 = 300.0;
/// Desk-scale default session length, seconds.
pub const DEFAULT_DURATION_S: f64 = 10.0;
pub const DEFAULT_WARMUP_S: f64 = 1.0;
pub const DEFAULT_BS_HEIGHT_M: f64 = 10.0;
pub const DEFAULT_USER_HEIGHT_M: f64 = 1.5;

/// Building map and base-station sites.
#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    pub map: BuildingMap,
    pub base_stations: Vec<Position>,
    pub user_height_m: f64,
}

impl Site {
    pub fn campus() -> Self {
        Site {
            map: campus_map(),
            base_stations: campus_site(DEFAULT_BS_HEIGHT_M),
            user_height_m: DEFAULT_USER_HEIGHT_M,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_stations.is_empty() {
            return Err(Error::invalid("base_stations", "at least one base station required"));
        }
        let b = self.map.bounds();
        if !self.base_stations.iter().all(|p| b.contains(p.xy)) {
            return Err(Error::invalid("base_stations", "base station outside map bounds"));
        }
        Ok(())
    }

    /// Uniform user drop for `seed`.
    pub fn place_users(&self, n: usize, seed: u64) -> Vec<Position> {
        geometry::place_users(&self.map, n, seed)
            .into_iter()
            .map(|xy| Position { xy, height: self.user_height_m })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub duration_s: f64,
    /// Bitplanes generated before this instant are excluded from metrics.
    pub warmup_s: f64,
    pub seed: u64,
    pub n_users: usize,
    pub site: Site,
    pub channel: ChannelConfig,
    pub scheduler: SchedulerConfig,
    pub flow: FlowConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_s: DEFAULT_DURATION_S,
            warmup_s: DEFAULT_WARMUP_S,
            seed: 1,
            n_users: 5,
            site: Site::campus(),
            channel: ChannelConfig::default(),
            scheduler: SchedulerConfig::default(),
            flow: FlowConfig::vr(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid("duration_s", "must be positive"));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return Err(Error::invalid("warmup_s", "must satisfy 0 <= warmup_s < duration_s"));
        }
        self.site.validate()?;
        self.channel.validate()?;
        self.scheduler.validate()?;
        self.flow.validate()?;
        if self.scheduler.connectivity == Connectivity::Dual && self.site.base_stations.len() < 2 {
            return Err(Error::invalid("connectivity", "dual connectivity needs two base stations"));
        }
        Ok(())
    }
}

/// Per-bitplane delivery counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub generated: u64,
    pub delivered_in_deadline: u64,
    pub delivered_late: u64,
    pub expired: u64,
    pub in_flight_at_end: u64,
}

impl Counts {
    pub fn success_pct(&self) -> Option<f64> {
        (self.generated > 0).then(|| 100.0 * self.delivered_in_deadline as f64 / self.generated as f64)
    }

    fn add(&mut self, o: &Counts) {
        self.generated += o.generated;
        self.delivered_in_deadline += o.delivered_in_deadline;
        self.delivered_late += o.delivered_late;
        self.expired += o.expired;
        self.in_flight_at_end += o.in_flight_at_end;
    }
}

/// Latency of delivered bitplanes relative to their generation instant.
///
/// Samples are kept as a fixed-width histogram; latencies can be negative
/// for prefetched traffic.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyStats {
    pub count: u64,
    pub sum_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    bins: Vec<u64>,
}

impl LatencyStats {
    pub const BIN_S: f64 = 1e-4;
    pub const LOW_S: f64 = -0.2;
    pub const HIGH_S: f64 = 2.0;

    fn new() -> Self {
        let n = ((Self::HIGH_S - Self::LOW_S) / Self::BIN_S).round() as usize;
        LatencyStats { count: 0, sum_s: 0.0, min_s: f64::INFINITY, max_s: f64::NEG_INFINITY, bins: vec![0; n] }
    }

    fn record(&mut self, latency_s: f64, n: u64) {
        if n == 0 {
            return;
        }
        self.count += n;
        self.sum_s += latency_s * n as f64;
        self.min_s = self.min_s.min(latency_s);
        self.max_s = self.max_s.max(latency_s);
        let idx = ((latency_s - Self::LOW_S) / Self::BIN_S).floor();
        let idx = (idx.max(0.0) as usize).min(self.bins.len() - 1);
        self.bins[idx] += n;
    }

    pub fn mean_s(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_s / self.count as f64)
    }

    /// Upper edge of the histogram bin holding quantile `q`.
    pub fn quantile_s(&self, q: f64) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        let target = (q.clamp(0.0, 1.0) * self.count as f64).ceil().max(1.0) as u64;
        let mut acc = 0;
        for (i, &c) in self.bins.iter().enumerate() {
            acc += c;
            if acc >= target {
                return Some((Self::LOW_S + (i + 1) as f64 * Self::BIN_S).min(self.max_s));
            }
        }
        Some(self.max_s)
    }
}

/// Delivery outcome of one frame of one user.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameOutcome {
    pub user: u32,
    pub frame: u64,
    pub n_planes: u32,
    /// Planes `[0, in_deadline)` arrived by the deadline.
    pub in_deadline: u32,
    /// Planes `[0, delivered)` arrived at all.
    pub delivered: u32,
    /// Whether the frame counts towards the metrics (generated after warmup).
    pub counted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub totals: Counts,
    pub per_user: Vec<Counts>,
    pub latency: LatencyStats,
    pub frames: Vec<FrameOutcome>,
    pub success_pct: Option<f64>,
}

/// `100 × delivered_in_deadline / generated`, absent when nothing was generated.
pub fn success_percentage(metrics: &RunMetrics) -> Option<f64> {
    metrics.totals.success_pct()
}

/// Copy-level bit accounting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BitLedger {
    pub enqueued: u64,
    pub transmitted: u64,
    pub expired: u64,
    pub cancelled: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ServeRecord {
    pub bs: usize,
    pub band: Band,
    pub user: usize,
    pub rate_bps: f64,
    pub bits_served: u64,
}

pub struct TtiReport<'a> {
    pub tti: u64,
    pub start_s: f64,
    pub served: &'a [ServeRecord],
    pub ledger: BitLedger,
    /// Untransmitted bits of all queued copies, summed from the queues.
    pub queued_bits: u64,
}

pub trait Observer {
    fn on_tti(&mut self, report: &TtiReport<'_>);
}

/// Achievable rate of a link given which co-band base stations transmit.
pub trait RateModel {
    fn rate(&self, band: Band, bs: usize, user: usize, active: &[bool]) -> f64;
}

/// Rates fixed per (band, base station, user), without interference.
#[derive(Clone, Debug)]
pub struct FixedRates {
    rates: [Vec<Vec<f64>>; 2],
}

impl FixedRates {
    /// `rates[band][bs][user]`; a missing secondary band is all zeros.
    pub fn new(primary: Vec<Vec<f64>>, secondary: Option<Vec<Vec<f64>>>) -> Self {
        let secondary = secondary.unwrap_or_else(|| primary.iter().map(|r| vec![0.0; r.len()]).collect());
        FixedRates { rates: [primary, secondary] }
    }
}

impl RateModel for FixedRates {
    fn rate(&self, band: Band, bs: usize, user: usize, _active: &[bool]) -> f64 {
        self.rates[band.index()][bs][user]
    }
}

/// Rates from received powers with co-band interference.
#[derive(Clone, Debug)]
pub struct ChannelRates {
    /// `links[band][bs][user]`.
    pub links: [Vec<Vec<LinkState>>; 2],
    rx_mw: [Vec<Vec<f64>>; 2],
    noise_mw: f64,
    bandwidth_hz: f64,
    se_max: f64,
}

impl ChannelRates {
    /// Link budgets from every base station to every user. The secondary band
    /// is only drawn when `dual`; each link uses its own random stream.
    pub fn new(site: &Site, users: &[Position], cfg: &ChannelConfig, seed: u64, dual: bool) -> Self {
        let draw = |band: u8| -> Vec<Vec<LinkState>> {
            site.base_stations
                .iter()
                .enumerate()
                .map(|(b, bs)| {
                    users
                        .iter()
                        .enumerate()
                        .map(|(u, ue)| {
                            let mut r = rng::stream(seed, Stream::Shadowing { band, bs: b as u32, user: u as u32 });
                            link_budget(bs, ue, &site.map, cfg, &mut r)
                        })
                        .collect()
                })
                .collect()
        };
        let primary = draw(0);
        let secondary = if dual { draw(1) } else { Vec::new() };
        let to_mw = |l: &Vec<Vec<LinkState>>| -> Vec<Vec<f64>> {
            l.iter().map(|row| row.iter().map(|s| db_to_linear(s.rx_dbm)).collect()).collect()
        };
        ChannelRates {
            rx_mw: [to_mw(&primary), to_mw(&secondary)],
            links: [primary, secondary],
            noise_mw: db_to_linear(cfg.noise_dbm()),
            bandwidth_hz: cfg.bandwidth_hz,
            se_max: cfg.se_max,
        }
    }
}

impl RateModel for ChannelRates {
    fn rate(&self, band: Band, bs: usize, user: usize, active: &[bool]) -> f64 {
        let rx = &self.rx_mw[band.index()];
        let interference: f64 = (0..rx.len())
            .filter(|&j| j != bs && active[j])
            .map(|j| rx[j][user])
            .sum();
        shannon_rate_linear(rx[bs][user] / (self.noise_mw + interference), self.bandwidth_hz, self.se_max)
    }
}

/// Fully resolved inputs of one simulation.
#[derive(Clone, Debug)]
pub struct Setup {
    pub n_bs: usize,
    /// One flow per user.
    pub flows: Vec<FlowConfig>,
    /// Per user, the (base station, band) pairs receiving a copy.
    pub attachments: Vec<Vec<(usize, Band)>>,
    pub scheduler: SchedulerConfig,
    pub duration_s: f64,
    pub warmup_s: f64,
}

impl Setup {
    pub fn validate(&self) -> Result<()> {
        if self.flows.len() != self.attachments.len() {
            return Err(Error::invalid("attachments", "one attachment list per flow required"));
        }
        for (u, att) in self.attachments.iter().enumerate() {
            if att.is_empty() {
                return Err(Error::invalid("attachments", format!("user {u} is not attached")));
            }
            if att.iter().any(|&(b, _)| b >= self.n_bs) {
                return Err(Error::invalid("attachments", format!("user {u} attached to unknown base station")));
            }
            let mut bands: Vec<Band> = att.iter().map(|&(_, band)| band).collect();
            bands.sort();
            bands.dedup();
            if bands.len() != att.len() {
                return Err(Error::invalid("attachments", format!("user {u} has two copies on one band")));
            }
        }
        for f in &self.flows {
            f.validate()?;
        }
        self.scheduler.validate()?;
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid("duration_s", "must be positive"));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return Err(Error::invalid("warmup_s", "must satisfy 0 <= warmup_s < duration_s"));
        }
        Ok(())
    }

    /// Number of TTIs starting before the end of the session.
    pub fn tti_count(&self) -> u64 {
        let x = self.duration_s / self.scheduler.tti_s;
        let r = x.round();
        if (x - r).abs() <= 1e-9 * x.max(1.0) {
            r as u64
        } else {
            x.ceil() as u64
        }
    }
}

struct FrameState {
    frame: Frame,
    delivered: u32,
    in_deadline: u32,
    live_copies: u8,
}

/// Runs the TTI loop for `setup` with link rates from `rates`.
pub fn simulate<R: RateModel>(setup: &Setup, rates: &R, mut observer: Option<&mut dyn Observer>) -> Result<RunMetrics> {
    setup.validate()?;
    let n_users = setup.flows.len();
    let sched = &setup.scheduler;
    let tti = sched.tti_s;

    let mut cells: Vec<BandScheduler> = Vec::new();
    let mut cell_of: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_users];
    for band in Band::ALL {
        for bs in 0..setup.n_bs {
            let users: Vec<usize> = (0..n_users)
                .filter(|&u| setup.attachments[u].contains(&(bs, band)))
                .collect();
            if users.is_empty() {
                continue;
            }
            let cell = BandScheduler::new(bs, band, users);
            for (local, &u) in cell.users().iter().enumerate() {
                cell_of[u].push((cells.len(), local));
            }
            cells.push(cell);
        }
    }

    let frame_counts: Vec<u64> = setup.flows.iter().map(|f| f.frame_count(setup.duration_s)).collect();
    let mut next_frame = vec![0u64; n_users];
    let mut states: Vec<Vec<FrameState>> = (0..n_users).map(|_| Vec::new()).collect();
    let mut latency = LatencyStats::new();
    let mut ledger = BitLedger::default();
    let mut events: Vec<CopyEvent> = Vec::new();
    let mut served: Vec<ServeRecord> = Vec::new();
    let mut active = vec![vec![false; setup.n_bs]; 2];
    let mut rate_buf: Vec<f64> = Vec::new();

    for m in 0..setup.tti_count() {
        let now = m as f64 * tti;
        let end = (m + 1) as f64 * tti;

        for u in 0..n_users {
            let flow = &setup.flows[u];
            while next_frame[u] < frame_counts[u] {
                let frame = flow.frame(next_frame[u]);
                if frame.avail_time > now {
                    break;
                }
                for &(ci, local) in &cell_of[u] {
                    cells[ci].enqueue(local, FrameCopy::new(frame, flow.drop_on_expiry));
                    ledger.enqueued += frame.total_bits();
                }
                states[u].push(FrameState { frame, delivered: 0, in_deadline: 0, live_copies: cell_of[u].len() as u8 });
                next_frame[u] += 1;
            }
        }

        events.clear();
        for cell in cells.iter_mut() {
            cell.expire(now, &mut events);
        }
        for cell in cells.iter_mut().filter(|c| c.band == Band::Secondary) {
            cell.cancel_delivered(|u, f| states[u][f as usize].delivered, &mut events);
        }
        apply_events(&events, &mut states, &mut ledger, end, setup.warmup_s, &mut latency);

        for row in active.iter_mut() {
            row.fill(false);
        }
        for cell in &cells {
            if cell.has_backlog() {
                active[cell.band.index()][cell.bs] = true;
            }
        }

        events.clear();
        served.clear();
        for cell in cells.iter_mut() {
            let band = cell.band;
            let bs = cell.bs;
            rate_buf.clear();
            for (local, &u) in cell.users().iter().enumerate() {
                let r = if cell.is_backlogged(local) { rates.rate(band, bs, u, &active[band.index()]) } else { 0.0 };
                rate_buf.push(r);
            }
            if let Some(s) = cell.serve_tti(sched, &rate_buf, &mut events) {
                ledger.transmitted += s.bits;
                served.push(ServeRecord { bs, band, user: s.user, rate_bps: s.rate_bps, bits_served: s.bits });
            }
        }
        apply_events(&events, &mut states, &mut ledger, end, setup.warmup_s, &mut latency);

        if let Some(obs) = observer.as_deref_mut() {
            let queued_bits = cells.iter().map(BandScheduler::queued_bits).sum();
            obs.on_tti(&TtiReport { tti: m, start_s: now, served: &served, ledger, queued_bits });
        }
    }

    let mut per_user = vec![Counts::default(); n_users];
    let mut frames = Vec::new();
    for u in 0..n_users {
        let flow = &setup.flows[u];
        for k in 0..frame_counts[u] {
            let (frame, delivered, in_deadline, live) = match states[u].get(k as usize) {
                Some(s) => (s.frame, s.delivered, s.in_deadline, s.live_copies > 0),
                None => (flow.frame(k), 0, 0, true),
            };
            let counted = frame.gen_time >= setup.warmup_s;
            frames.push(FrameOutcome { user: u as u32, frame: k, n_planes: frame.n_planes, in_deadline, delivered, counted });
            if !counted {
                continue;
            }
            let c = &mut per_user[u];
            let n = frame.n_planes as u64;
            c.generated += n;
            c.delivered_in_deadline += in_deadline as u64;
            c.delivered_late += (delivered - in_deadline) as u64;
            let undelivered = n - delivered as u64;
            if live {
                c.in_flight_at_end += undelivered;
            } else {
                c.expired += undelivered;
            }
        }
    }
    let mut totals = Counts::default();
    for c in &per_user {
        totals.add(c);
    }
    Ok(RunMetrics { success_pct: totals.success_pct(), totals, per_user, latency, frames })
}

fn apply_events(
    events: &[CopyEvent],
    states: &mut [Vec<FrameState>],
    ledger: &mut BitLedger,
    end: f64,
    warmup_s: f64,
    latency: &mut LatencyStats,
) {
    for ev in events {
        match *ev {
            CopyEvent::Progress { user, frame, upto, finished } => {
                let s = &mut states[user][frame as usize];
                if upto > s.delivered {
                    if s.frame.gen_time >= warmup_s {
                        latency.record(end - s.frame.gen_time, (upto - s.delivered) as u64);
                    }
                    s.delivered = upto;
                }
                if end <= s.frame.deadline {
                    s.in_deadline = s.in_deadline.max(upto);
                }
                if finished {
                    s.live_copies -= 1;
                }
            }
            CopyEvent::Expired { user, frame, bits } => {
                ledger.expired += bits;
                states[user][frame as usize].live_copies -= 1;
            }
            CopyEvent::Cancelled { user, frame, bits, removed } => {
                ledger.cancelled += bits;
                if removed {
                    states[user][frame as usize].live_copies -= 1;
                }
            }
        }
    }
}

/// Places users, draws link budgets and runs one session.
pub fn run(cfg: &SimConfig) -> Result<RunMetrics> {
    run_observed(cfg, None)
}

pub fn run_observed(cfg: &SimConfig, observer: Option<&mut dyn Observer>) -> Result<RunMetrics> {
    cfg.validate()?;
    let users = cfg.site.place_users(cfg.n_users, cfg.seed);
    run_scenario(cfg, &users, observer)
}

/// Like [`run`], with explicit user positions.
pub fn run_scenario(cfg: &SimConfig, users: &[Position], observer: Option<&mut dyn Observer>) -> Result<RunMetrics> {
    cfg.validate()?;
    if users.len() != cfg.n_users {
        return Err(Error::invalid("n_users", format!("{} users configured, {} positions given", cfg.n_users, users.len())));
    }
    let bounds = cfg.site.map.bounds();
    if !users.iter().all(|p| bounds.contains(p.xy)) {
        return Err(Error::invalid("user_positions", "user outside map bounds"));
    }
    let dual = cfg.scheduler.connectivity == Connectivity::Dual;
    let rates = ChannelRates::new(&cfg.site, users, &cfg.channel, cfg.seed, dual);
    let attachments = users
        .iter()
        .map(|u| duplicate_for_dc(cfg.scheduler.connectivity, &rank_bs(u, &cfg.site.base_stations)?))
        .collect::<Result<Vec<_>>>()?;
    let setup = Setup {
        n_bs: cfg.site.base_stations.len(),
        flows: vec![cfg.flow.clone(); users.len()],
        attachments,
        scheduler: cfg.scheduler.clone(),
        duration_s: cfg.duration_s,
        warmup_s: cfg.warmup_s,
    };
    simulate(&setup, &rates, observer)
}

/// Success percentage over independent runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Replication {
    /// Per seed, in input order; absent when that run generated nothing.
    pub values: Vec<Option<f64>>,
    pub runs: usize,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
}

impl Replication {
    /// Sample mean, sample standard deviation and the normal-approximation
    /// 95% interval of the present values.
    pub fn from_values(values: Vec<Option<f64>>) -> Self {
        let xs: Vec<f64> = values.iter().flatten().copied().collect();
        let n = xs.len();
        let runs = values.len();
        if n == 0 {
            return Replication { values, runs, mean: None, stddev: None, ci95_low: None, ci95_high: None };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * sd / (n as f64).sqrt();
        Replication { values, runs, mean: Some(mean), stddev: Some(sd), ci95_low: Some(mean - half), ci95_high: Some(mean + half) }
    }

    pub fn ci_width(&self) -> Option<f64> {
        Some(self.ci95_high? - self.ci95_low?)
    }
}

/// One run per seed (fresh placement and shadowing each), in parallel.
pub fn replicate(cfg: &SimConfig, seeds: &[u64]) -> Result<Replication> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "at least one seed required"));
    }
    let values = seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run(&c).map(|m| m.success_pct)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Replication::from_values(values))
}
