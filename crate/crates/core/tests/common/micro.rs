//! Micro-scenarios with precomputed per-TTI rates, run through both the
//! engine and the brute-force reference.

use super::reference::{self, RefFlow, RefScenario};
use proptest::prelude::*;
use vrcell::engine::{simulate, RateModel, RunMetrics, Setup};
use vrcell::scheduler::{Band, Discipline, SchedulerConfig};
use vrcell::traffic::{FlowConfig, TrafficKind};

pub const TTI: f64 = 125e-6;
pub const REFRESH: f64 = 1000.0;

pub struct LoadRates {
    pub base: Vec<Vec<Vec<f64>>>,
    pub interference: bool,
}

pub fn load_rate(base: f64, others: usize, interference: bool) -> f64 {
    if interference {
        base / (1 + others) as f64
    } else {
        base
    }
}

impl RateModel for LoadRates {
    fn rate(&self, band: Band, bs: usize, user: usize, active: &[bool]) -> f64 {
        let others = active.iter().enumerate().filter(|&(j, &a)| j != bs && a).count();
        load_rate(self.base[band.index()][bs][user], others, self.interference)
    }
}

pub fn ref_rate_plain(sc: &RefScenario, band: usize, bs: usize, u: usize, others: usize) -> f64 {
    load_rate(sc.base_rates[band][bs][u], others, false)
}

pub fn ref_rate_loaded(sc: &RefScenario, band: usize, bs: usize, u: usize, others: usize) -> f64 {
    load_rate(sc.base_rates[band][bs][u], others, true)
}

/// A randomly drawn scenario small enough for the reference simulator.
#[derive(Clone, Debug)]
pub struct Micro {
    pub n_bs: usize,
    pub users: Vec<(u64, u64, f64, f64, bool, Vec<(usize, usize)>)>,
    pub pf: bool,
    pub pf_tc: u32,
    pub n_ttis: u64,
    pub warmup_frames: u64,
    pub rates: Vec<Vec<Vec<f64>>>,
    pub interference: bool,
}

pub fn plane_rate() -> impl Strategy<Value = f64> {
    // expressed in planes per TTI, zero and sub-bit budgets included
    prop_oneof![Just(0.0), Just(1e-5), 0.2f64..3.0, Just(1.0)]
}

pub fn deadline_ms() -> impl Strategy<Value = f64> {
    // on-grid values make completions land exactly on the deadline
    prop_oneof![0.1f64..3.0, (1u32..24).prop_map(|k| k as f64 * 0.125)]
}

pub fn micro() -> impl Strategy<Value = Micro> {
    (1usize..=2, 1usize..=3, any::<bool>(), 1u32..20, 1u64..=5, any::<bool>()).prop_flat_map(
        |(n_bs, n_users, pf, pf_tc, frames, interference)| {
            let user = (
                100u64..2000,
                1u64..=10,
                0.0f64..1.0,
                deadline_ms(),
                prop_oneof![0.0f64..2.0, (1u32..16).prop_map(|k| k as f64 * 0.125)],
                any::<bool>(),
                any::<bool>(),
                0..n_bs,
                any::<bool>(),
            );
            (
                proptest::collection::vec(user, n_users),
                proptest::collection::vec(proptest::collection::vec(proptest::collection::vec(plane_rate(), n_users), n_bs), 2),
                0u64..frames,
            )
                .prop_map(move |(us, rates, warmup_frames)| {
                    let mut users = Vec::new();
                    let mut abs_rates = vec![vec![vec![0.0; n_users]; n_bs]; 2];
                    for (u, (pb, planes, frac, dl, pre, trad, drop, bs, dual)) in us.into_iter().enumerate() {
                        let frame_bits = ((planes - 1) * pb + ((pb as f64 * frac).ceil() as u64).clamp(1, pb)).max(1);
                        let mut att = vec![(bs, 0)];
                        if dual && n_bs == 2 {
                            att.push((1 - bs, 1));
                        }
                        let prefetch = if trad { pre } else { 0.0 };
                        for band in 0..2 {
                            for b in 0..n_bs {
                                abs_rates[band][b][u] = rates[band][b][u] * pb as f64 / TTI;
                            }
                        }
                        users.push((pb, frame_bits, dl, prefetch, drop || !trad, att));
                    }
                    Micro {
                        n_bs,
                        users,
                        pf,
                        pf_tc,
                        n_ttis: frames * 8,
                        warmup_frames,
                        rates: abs_rates,
                        interference,
                    }
                })
        },
    )
}

/// Runs `m` through the engine and the reference and compares per-user
/// counts and per-frame outcomes.
pub fn check(m: &Micro) -> Result<RunMetrics, TestCaseError> {
    let flows: Vec<FlowConfig> = m
        .users
        .iter()
        .map(|&(pb, fb, dl, pre, drop, _)| FlowConfig {
            kind: if pre > 0.0 { TrafficKind::TraditionalVideo } else { TrafficKind::Vr },
            bit_rate_bps: fb as f64 * REFRESH,
            refresh_hz: REFRESH,
            bitplane_bits: pb,
            deadline_ms: dl,
            prefetch_ms: pre,
            drop_on_expiry: drop,
        })
        .collect();
    let warmup_s = m.warmup_frames as f64 / REFRESH;
    let setup = Setup {
        n_bs: m.n_bs,
        flows,
        attachments: m
            .users
            .iter()
            .map(|u| u.5.iter().map(|&(b, band)| (b, if band == 0 { Band::Primary } else { Band::Secondary })).collect())
            .collect(),
        scheduler: SchedulerConfig {
            discipline: if m.pf { Discipline::ProportionalFair } else { Discipline::RoundRobin },
            tti_s: TTI,
            pf_time_constant_ttis: m.pf_tc,
            ..SchedulerConfig::default()
        },
        duration_s: m.n_ttis as f64 * TTI,
        warmup_s,
    };
    let rates = LoadRates { base: m.rates.clone(), interference: m.interference };
    let got = simulate(&setup, &rates, None).unwrap();

    let sc = RefScenario {
        n_bs: m.n_bs,
        flows: m
            .users
            .iter()
            .map(|&(pb, fb, dl, pre, drop, _)| RefFlow {
                frame_bits: fb,
                plane_bits: pb,
                refresh_hz: REFRESH,
                deadline_ms: dl,
                prefetch_ms: pre,
                drop,
            })
            .collect(),
        attachments: m.users.iter().map(|u| u.5.clone()).collect(),
        pf: m.pf,
        tti_s: TTI,
        pf_tc: m.pf_tc,
        n_ttis: m.n_ttis,
        warmup_s,
        rate: if m.interference { ref_rate_loaded } else { ref_rate_plain },
        base_rates: m.rates.clone(),
    };
    let want = reference::simulate(&sc);

    for (u, (g, w)) in got.per_user.iter().zip(&want.per_user).enumerate() {
        prop_assert_eq!(
            (g.generated, g.delivered_in_deadline, g.delivered_late, g.expired, g.in_flight_at_end),
            (w.generated, w.in_deadline, w.late, w.expired, w.in_flight),
            "user {}",
            u
        );
    }
    for f in &got.frames {
        let (in_dl, dlv) = want.frames[f.user as usize][f.frame as usize];
        prop_assert_eq!((f.in_deadline, f.delivered), (in_dl, dlv), "user {} frame {}", f.user, f.frame);
    }
    let frames_expected: usize = want.frames.iter().map(Vec::len).sum();
    prop_assert_eq!(got.frames.len(), frames_expected);
    Ok(got)
}

