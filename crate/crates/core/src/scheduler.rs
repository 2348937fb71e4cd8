//! Per-TTI downlink scheduling at one base station on one band.
//!
//! Each base station serves one user per TTI on the whole band (TDMA). A
//! user's queue holds copies of video frames; a copy tracks how far its
//! bitplanes have been transmitted, so a frame of thousands of bitplanes is
//! one queue entry. Bitplanes of a copy always complete in index order.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::traffic::Frame;
use crate::{Error, Result, Scalar};

/// Lower bound on PF average throughput, bits/s.
pub const PF_AVG_FLOOR: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    #[serde(alias = "rr")]
    RoundRobin,
    #[serde(alias = "pf")]
    ProportionalFair,
}

impl Discipline {
    pub fn label(self) -> &'static str {
        match self {
            Discipline::RoundRobin => "rr",
            Discipline::ProportionalFair => "pf",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Single,
    Dual,
}

impl Connectivity {
    pub fn label(self) -> &'static str {
        match self {
            Connectivity::Single => "single",
            Connectivity::Dual => "dual",
        }
    }
}

/// Spectrum a copy travels on. The two bands never interfere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Primary = 0,
    Secondary = 1,
}

impl Band {
    pub const ALL: [Band; 2] = [Band::Primary, Band::Secondary];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerConfig {
    pub discipline: Discipline,
    pub tti_s: f64,
    pub pf_time_constant_ttis: u32,
    pub connectivity: Connectivity,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            discipline: Discipline::RoundRobin,
            tti_s: 125e-6,
            pf_time_constant_ttis: 100,
            connectivity: Connectivity::Single,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tti_s > 0.0 && self.tti_s.is_finite()) {
            return Err(Error::invalid("tti_s", "must be positive"));
        }
        if self.pf_time_constant_ttis < 1 {
            return Err(Error::invalid("pf_time_constant_ttis", "must be at least 1"));
        }
        Ok(())
    }
}

/// Next backlogged user strictly after `cursor`, cyclically.
pub fn rr_pick(backlogged: &[bool], cursor: usize) -> Option<usize> {
    let n = backlogged.len();
    (1..=n).map(|k| (cursor + k) % n).find(|&i| backlogged[i])
}

/// Backlogged user maximising `inst_rate / avg_throughput`; ties go to the
/// lowest index.
pub fn pf_pick<T: Scalar>(inst_rate: &[T], avg_throughput: &[T], backlogged: &[bool]) -> Option<usize> {
    let floor = T::lit(PF_AVG_FLOOR);
    let mut best: Option<(usize, T)> = None;
    for (i, _) in backlogged.iter().enumerate().filter(|(_, &b)| b) {
        let metric = inst_rate[i] / avg_throughput[i].max(floor);
        match best {
            Some((_, m)) if !(metric > m) => {}
            _ => best = Some((i, metric)),
        }
    }
    best.map(|(i, _)| i)
}

/// Exponential moving average of served throughput.
pub fn pf_update<T: Scalar>(avg: T, served_rate: T, time_constant: u32) -> T {
    let w = T::one() / T::lit(time_constant.max(1) as f64);
    (T::one() - w) * avg + w * served_rate
}

/// Whole bits a link carries in one TTI.
pub fn tti_bit_budget(rate_bps: f64, tti_s: f64) -> u64 {
    if !(rate_bps > 0.0) {
        return 0;
    }
    (rate_bps * tti_s + 1e-9).floor() as u64
}

/// Where a newly available frame is queued: the closest base station on
/// the primary band and, under dual connectivity, the second closest on the
/// secondary band.
pub fn duplicate_for_dc(connectivity: Connectivity, ranked_bs: &[usize]) -> Result<Vec<(usize, Band)>> {
    let first = *ranked_bs
        .first()
        .ok_or_else(|| Error::invalid("ranked_bs", "no base station"))?;
    match connectivity {
        Connectivity::Single => Ok(vec![(first, Band::Primary)]),
        Connectivity::Dual => {
            let second = *ranked_bs
                .get(1)
                .ok_or_else(|| Error::invalid("connectivity", "dual connectivity needs two base stations"))?;
            Ok(vec![(first, Band::Primary), (second, Band::Secondary)])
        }
    }
}

/// One queued copy of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameCopy {
    pub frame: Frame,
    /// First bitplane not yet fully transmitted.
    pub next_plane: u32,
    /// Untransmitted bits of `next_plane`.
    pub head_remaining: u64,
    pub drop_on_expiry: bool,
}

impl FrameCopy {
    pub fn new(frame: Frame, drop_on_expiry: bool) -> Self {
        FrameCopy {
            head_remaining: frame.plane_size(0),
            frame,
            next_plane: 0,
            drop_on_expiry,
        }
    }

    pub fn is_done(&self) -> bool {
        self.next_plane >= self.frame.n_planes
    }

    /// Bits still to transmit.
    pub fn remaining_bits(&self) -> u64 {
        if self.is_done() {
            return 0;
        }
        let f = &self.frame;
        let after_head = f.n_planes - self.next_plane - 1;
        let tail = if after_head == 0 {
            0
        } else {
            (after_head as u64 - 1) * f.plane_bits + f.last_plane_bits
        };
        self.head_remaining + tail
    }

    /// Transmits up to `budget` bits; returns the bits used.
    pub fn drain(&mut self, mut budget: u64) -> u64 {
        let mut used = 0;
        let n = self.frame.n_planes;
        while budget > 0 && self.next_plane < n {
            if self.head_remaining > budget {
                self.head_remaining -= budget;
                return used + budget;
            }
            used += self.head_remaining;
            budget -= self.head_remaining;
            self.next_plane += 1;
            if self.next_plane == n {
                self.head_remaining = 0;
                break;
            }
            // whole planes before the final one
            let middle = (n - 1 - self.next_plane) as u64;
            let k = (budget / self.frame.plane_bits).min(middle);
            self.next_plane += k as u32;
            budget -= k * self.frame.plane_bits;
            used += k * self.frame.plane_bits;
            self.head_remaining = self.frame.plane_size(self.next_plane);
        }
        used
    }

    /// Skips planes below `plane` (already delivered elsewhere); returns the
    /// untransmitted bits discarded.
    pub fn advance_to(&mut self, plane: u32) -> u64 {
        if plane <= self.next_plane {
            return 0;
        }
        let before = self.remaining_bits();
        let plane = plane.min(self.frame.n_planes);
        self.next_plane = plane;
        self.head_remaining = if plane < self.frame.n_planes { self.frame.plane_size(plane) } else { 0 };
        before - self.remaining_bits()
    }
}

/// Something that happened to a queued copy during a TTI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CopyEvent {
    /// Planes `[0, upto)` of the copy are complete.
    Progress { user: usize, frame: u64, upto: u32, finished: bool },
    /// The copy was removed with `bits` untransmitted.
    Expired { user: usize, frame: u64, bits: u64 },
    /// Already-delivered planes were skipped; `removed` when nothing is left.
    Cancelled { user: usize, frame: u64, bits: u64, removed: bool },
}

/// Outcome of one scheduled TTI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Served {
    pub user: usize,
    pub rate_bps: f64,
    pub bits: u64,
}

/// Scheduling state of one base station on one band.
#[derive(Clone, Debug)]
pub struct BandScheduler {
    pub bs: usize,
    pub band: Band,
    users: Vec<usize>,
    queues: Vec<VecDeque<FrameCopy>>,
    rr_cursor: usize,
    pf_avg: Vec<f64>,
    pf_seen: Vec<bool>,
}

impl BandScheduler {
    /// `users` are global user ids; they are kept sorted.
    pub fn new(bs: usize, band: Band, mut users: Vec<usize>) -> Self {
        users.sort_unstable();
        users.dedup();
        let n = users.len();
        BandScheduler {
            bs,
            band,
            users,
            queues: vec![VecDeque::new(); n],
            rr_cursor: n.saturating_sub(1),
            pf_avg: vec![0.0; n],
            pf_seen: vec![false; n],
        }
    }

    pub fn users(&self) -> &[usize] {
        &self.users
    }

    pub fn local_index(&self, user: usize) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    pub fn enqueue(&mut self, local: usize, copy: FrameCopy) {
        self.queues[local].push_back(copy);
    }

    pub fn queue(&self, local: usize) -> &VecDeque<FrameCopy> {
        &self.queues[local]
    }

    pub fn is_backlogged(&self, local: usize) -> bool {
        !self.queues[local].is_empty()
    }

    pub fn has_backlog(&self) -> bool {
        self.queues.iter().any(|q| !q.is_empty())
    }

    pub fn queued_bits(&self) -> u64 {
        self.queues.iter().flatten().map(FrameCopy::remaining_bits).sum()
    }

    pub fn pf_average(&self, local: usize) -> f64 {
        self.pf_avg[local]
    }

    /// Removes droppable copies whose deadline lies before `now`.
    pub fn expire(&mut self, now: f64, events: &mut Vec<CopyEvent>) {
        for (local, q) in self.queues.iter_mut().enumerate() {
            let user = self.users[local];
            q.retain(|c| {
                let dead = c.drop_on_expiry && now > c.frame.deadline;
                if dead {
                    events.push(CopyEvent::Expired { user, frame: c.frame.index, bits: c.remaining_bits() });
                }
                !dead
            });
        }
    }

    /// Lets `delivered(user, frame)` report planes already delivered by
    /// another copy; those planes are skipped here.
    pub fn cancel_delivered(&mut self, mut delivered: impl FnMut(usize, u64) -> u32, events: &mut Vec<CopyEvent>) {
        for (local, q) in self.queues.iter_mut().enumerate() {
            let user = self.users[local];
            q.retain_mut(|c| {
                let upto = delivered(user, c.frame.index);
                if upto <= c.next_plane {
                    return true;
                }
                let bits = c.advance_to(upto);
                let removed = c.is_done();
                events.push(CopyEvent::Cancelled { user, frame: c.frame.index, bits, removed });
                !removed
            });
        }
    }

    /// Picks one backlogged user with a non-empty bit budget, drains its head-of-line copies for one TTI
    /// and updates PF averages. `rates` is indexed by local user.
    pub fn serve_tti(&mut self, cfg: &SchedulerConfig, rates: &[f64], events: &mut Vec<CopyEvent>) -> Option<Served> {
        // a link whose TTI budget rounds to zero bits cannot carry a block
        let backlogged: Vec<bool> = self
            .queues
            .iter()
            .zip(rates)
            .map(|(q, &r)| !q.is_empty() && tti_bit_budget(r, cfg.tti_s) > 0)
            .collect();
        for (i, &b) in backlogged.iter().enumerate() {
            if b && !self.pf_seen[i] {
                self.pf_seen[i] = true;
                self.pf_avg[i] = rates[i].max(PF_AVG_FLOOR);
            }
        }
        let pick = match cfg.discipline {
            Discipline::RoundRobin => rr_pick(&backlogged, self.rr_cursor),
            Discipline::ProportionalFair => pf_pick(rates, &self.pf_avg, &backlogged),
        };
        let served = pick.map(|local| {
            self.rr_cursor = local;
            let budget = tti_bit_budget(rates[local], cfg.tti_s);
            let user = self.users[local];
            let mut left = budget;
            let q = &mut self.queues[local];
            while left > 0 {
                let Some(copy) = q.front_mut() else { break };
                let before = copy.next_plane;
                left -= copy.drain(left);
                let finished = copy.is_done();
                if copy.next_plane > before {
                    events.push(CopyEvent::Progress { user, frame: copy.frame.index, upto: copy.next_plane, finished });
                }
                if finished {
                    q.pop_front();
                }
            }
            Served { user, rate_bps: rates[local], bits: budget - left }
        });
        for i in 0..self.users.len() {
            if !self.pf_seen[i] {
                continue;
            }
            let got = match served {
                Some(s) if self.users[i] == s.user => s.bits as f64 / cfg.tti_s,
                _ => 0.0,
            };
            self.pf_avg[i] = pf_update(self.pf_avg[i], got, cfg.pf_time_constant_ttis).max(PF_AVG_FLOOR);
        }
        served
    }
}
