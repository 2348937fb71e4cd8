//! Brute-force reference scheduler.
//!
//! Tracks every bitplane of every copy individually and replays the
//! scheduling rules literally, one TTI at a time. Shares no code with the
//! engine beyond plain data types.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct RefFlow {
    pub frame_bits: u64,
    pub plane_bits: u64,
    pub refresh_hz: f64,
    pub deadline_ms: f64,
    pub prefetch_ms: f64,
    pub drop: bool,
}

#[derive(Clone, Debug)]
pub struct RefScenario {
    pub n_bs: usize,
    pub flows: Vec<RefFlow>,
    /// (bs, band) per user; band 0 = primary.
    pub attachments: Vec<Vec<(usize, usize)>>,
    pub pf: bool,
    pub tti_s: f64,
    pub pf_tc: u32,
    pub n_ttis: u64,
    pub warmup_s: f64,
    /// Rate of (band, bs, user) given the number of other co-band base
    /// stations with backlog.
    pub rate: fn(&RefScenario, usize, usize, usize, usize) -> f64,
    pub base_rates: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RefCounts {
    pub generated: u64,
    pub in_deadline: u64,
    pub late: u64,
    pub expired: u64,
    pub in_flight: u64,
}

#[derive(Clone, Copy, Debug)]
struct Plane {
    user: usize,
    frame: usize,
    plane: usize,
    left: u64,
    deadline: f64,
    drop: bool,
}

struct Cell {
    bs: usize,
    band: usize,
    users: Vec<usize>,
    queues: Vec<VecDeque<Plane>>,
    cursor: usize,
    avg: Vec<f64>,
    seen: Vec<bool>,
}

pub struct RefOutcome {
    pub per_user: Vec<RefCounts>,
    /// `[user][frame]` = (in-deadline prefix length, delivered prefix length).
    pub frames: Vec<Vec<(u32, u32)>>,
}

fn planes_in(f: &RefFlow) -> usize {
    f.frame_bits.div_ceil(f.plane_bits) as usize
}

fn plane_size(f: &RefFlow, p: usize) -> u64 {
    let n = planes_in(f);
    if p + 1 < n {
        f.plane_bits
    } else {
        f.frame_bits - (n as u64 - 1) * f.plane_bits
    }
}

pub fn simulate(sc: &RefScenario) -> RefOutcome {
    let n_users = sc.flows.len();
    let mut cells: Vec<Cell> = Vec::new();
    for band in 0..2 {
        for bs in 0..sc.n_bs {
            let users: Vec<usize> = (0..n_users).filter(|&u| sc.attachments[u].contains(&(bs, band))).collect();
            if users.is_empty() {
                continue;
            }
            let n = users.len();
            cells.push(Cell {
                bs,
                band,
                users,
                queues: vec![VecDeque::new(); n],
                cursor: n - 1,
                avg: vec![0.0; n],
                seen: vec![false; n],
            });
        }
    }

    // frames generated strictly before the end; refresh divides the TTI grid
    let duration = sc.n_ttis as f64 * sc.tti_s;
    let n_frames: Vec<usize> = sc
        .flows
        .iter()
        .map(|f| {
            let mut k = 0usize;
            while (k as f64) / f.refresh_hz < duration - 1e-12 {
                k += 1;
            }
            k
        })
        .collect();
    // delivery time of each plane, None if never delivered
    let mut delivered: Vec<Vec<Vec<Option<f64>>>> =
        (0..n_users).map(|u| vec![vec![None; planes_in(&sc.flows[u])]; n_frames[u]]).collect();
    let mut enqueued: Vec<Vec<bool>> = (0..n_users).map(|u| vec![false; n_frames[u]]).collect();

    for m in 0..sc.n_ttis {
        let now = m as f64 * sc.tti_s;
        let end = (m + 1) as f64 * sc.tti_s;

        for u in 0..n_users {
            let f = &sc.flows[u];
            for k in 0..n_frames[u] {
                if enqueued[u][k] {
                    continue;
                }
                let gen = k as f64 / f.refresh_hz;
                let avail = (gen - f.prefetch_ms / 1e3).max(0.0);
                if avail > now {
                    continue;
                }
                enqueued[u][k] = true;
                let deadline = gen + f.deadline_ms / 1e3;
                for cell in cells.iter_mut() {
                    if let Some(local) = cell.users.iter().position(|&x| x == u) {
                        for p in 0..planes_in(f) {
                            cell.queues[local].push_back(Plane {
                                user: u,
                                frame: k,
                                plane: p,
                                left: plane_size(f, p),
                                deadline,
                                drop: f.drop,
                            });
                        }
                    }
                }
            }
        }

        for cell in cells.iter_mut() {
            for q in cell.queues.iter_mut() {
                q.retain(|p| !(p.drop && now > p.deadline));
            }
        }
        for cell in cells.iter_mut().filter(|c| c.band == 1) {
            for q in cell.queues.iter_mut() {
                q.retain(|p| delivered[p.user][p.frame][p.plane].is_none());
            }
        }

        let mut active = vec![vec![false; sc.n_bs]; 2];
        for cell in &cells {
            if cell.queues.iter().any(|q| !q.is_empty()) {
                active[cell.band][cell.bs] = true;
            }
        }

        let mut completions: Vec<(usize, usize, usize)> = Vec::new();
        for cell in cells.iter_mut() {
            let others = (0..sc.n_bs).filter(|&j| j != cell.bs && active[cell.band][j]).count();
            let n = cell.users.len();
            let rates: Vec<f64> = (0..n)
                .map(|i| if cell.queues[i].is_empty() { 0.0 } else { (sc.rate)(sc, cell.band, cell.bs, cell.users[i], others) })
                .collect();
            let budgets: Vec<u64> =
                rates.iter().map(|&r| if r > 0.0 { (r * sc.tti_s + 1e-9).floor() as u64 } else { 0 }).collect();
            let eligible: Vec<bool> = (0..n).map(|i| !cell.queues[i].is_empty() && budgets[i] > 0).collect();
            for i in 0..n {
                if eligible[i] && !cell.seen[i] {
                    cell.seen[i] = true;
                    cell.avg[i] = rates[i].max(1.0);
                }
            }
            let pick = if sc.pf {
                let mut best: Option<(usize, f64)> = None;
                for i in 0..n {
                    if !eligible[i] {
                        continue;
                    }
                    let metric = rates[i] / cell.avg[i].max(1.0);
                    if best.is_none_or(|(_, b)| metric > b) {
                        best = Some((i, metric));
                    }
                }
                best.map(|(i, _)| i)
            } else {
                (1..=n).map(|k| (cell.cursor + k) % n).find(|&i| eligible[i])
            };
            let mut served_bits = 0u64;
            if let Some(i) = pick {
                cell.cursor = i;
                let mut budget = budgets[i];
                while budget > 0 {
                    let Some(head) = cell.queues[i].front_mut() else { break };
                    let take = head.left.min(budget);
                    head.left -= take;
                    budget -= take;
                    served_bits += take;
                    if head.left == 0 {
                        completions.push((head.user, head.frame, head.plane));
                        cell.queues[i].pop_front();
                    }
                }
            }
            for j in 0..n {
                if !cell.seen[j] {
                    continue;
                }
                let got = if Some(j) == pick { served_bits as f64 / sc.tti_s } else { 0.0 };
                let w = 1.0 / sc.pf_tc as f64;
                cell.avg[j] = ((1.0 - w) * cell.avg[j] + w * got).max(1.0);
            }
        }
        for (u, k, p) in completions {
            let slot = &mut delivered[u][k][p];
            if slot.is_none() {
                *slot = Some(end);
            }
        }
    }

    let mut per_user = vec![RefCounts::default(); n_users];
    let mut frames = Vec::new();
    for u in 0..n_users {
        let f = &sc.flows[u];
        let mut fr = Vec::new();
        for k in 0..n_frames[u] {
            let gen = k as f64 / f.refresh_hz;
            let deadline = gen + f.deadline_ms / 1e3;
            let n = planes_in(f);
            let in_dl = (0..n).take_while(|&p| matches!(delivered[u][k][p], Some(t) if t <= deadline)).count();
            let dlv = (0..n).take_while(|&p| delivered[u][k][p].is_some()).count();
            fr.push((in_dl as u32, dlv as u32));
            if gen < sc.warmup_s {
                continue;
            }
            let c = &mut per_user[u];
            for p in 0..n {
                c.generated += 1;
                match delivered[u][k][p] {
                    Some(t) if t <= deadline => c.in_deadline += 1,
                    Some(_) => c.late += 1,
                    None => {
                        let queued = cells
                            .iter()
                            .flat_map(|c| c.queues.iter().flatten())
                            .any(|q| q.user == u && q.frame == k && q.plane == p);
                        if enqueued[u][k] && !queued {
                            c.expired += 1;
                        } else {
                            c.in_flight += 1;
                        }
                    }
                }
            }
        }
        frames.push(fr);
    }
    RefOutcome { per_user, frames }
}
