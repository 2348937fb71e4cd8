//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::cell::Cell;
use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use common::micro::{check, micro};
use num_rational::Ratio;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rayon::prelude::*;
use vrcell::channel::{breakpoint_distance, pathloss_los, pathloss_nlos, umi_los, umi_nlos, SPEED_OF_LIGHT};
use vrcell::engine::{run, run_observed, BitLedger, Observer, SimConfig, TtiReport, DEFAULT_DURATION_S};
use vrcell::experiment::{parse_config_str, run_experiment};
use vrcell::qos::{parse_rate, phase_requirements, PhaseSpec, LOW_LATENCY_RATIO};
use vrcell::scheduler::{Connectivity, Discipline};
use vrcell::traffic::{FlowConfig, TrafficKind};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Runs `f`, turning a panic into a failure.
fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

// ---- requirement table -------------------------------------------------

/// Published cells per phase: uncompressed, 20:1 (full, FoV), 300:1 (full,
/// FoV). The Pre-VR column prints only the full-view compressed rates.
#[rustfmt::skip]
const PUBLISHED: [(&str, &str, Option<&str>, &str, Option<&str>); 5] = [
    ("10.62 Gbps",   "530 Mbps",   None,               "35 Mbps",   None),
    ("63.70 Gbps",   "3.18 Gbps",  Some("796 Mbps"),   "210 Mbps",  Some("53 Mbps")),
    ("238.89 Gbps",  "11.94 Gbps", Some("5.31 Gbps"),  "796 Mbps",  Some("354 Mbps")),
    ("1007.77 Gbps", "50.39 Gbps", Some("31.49 Gbps"), "3.36 Gbps", Some("2.10 Gbps")),
    ("1911.03 Gbps", "95.55 Gbps", Some("66.36 Gbps"), "6.37 Gbps", Some("4.42 Gbps")),
];

/// (full w, full h, eye w, eye h, bits per colour, refresh) per phase.
const DISPLAY: [(u64, u64, u64, u64, u64, u64); 5] = [
    (3840, 1920, 1080, 1080, 8, 60),
    (7680, 3840, 1920, 1920, 8, 90),
    (11520, 5760, 3840, 3840, 10, 120),
    (21600, 10800, 9000, 8100, 12, 120),
    (23040, 11520, 9600, 9600, 12, 200),
];

fn split_pair(cell: &str) -> (f64, f64) {
    let full = cell.split(" (Full-view)").next().unwrap();
    let fov = cell.split(" (Full-view) ").nth(1).unwrap().trim_end_matches(" (FoV)");
    (parse_rate(full).unwrap(), parse_rate(fov).unwrap())
}

fn requirement_table() -> Outcome {
    let csv = vrcell::experiment::emit_qos_table().unwrap();
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    let row = |label: &str| rows.iter().find(|r| &r[0] == label).unwrap().clone();
    let unc = row("Uncompressed Bit Rate (Progressive 1:1)");
    let low = row("Transmitting Bit Rate (Low-latency Compression 20:1)");
    let lossy = row("Transmitting Bit Rate (Lossy Compression 300:1)");

    let mut cells = 0;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    let mut cmp = |printed: f64, published: &str, what: String| {
        let want = parse_rate(published).unwrap();
        let rel = (printed - want).abs() / want;
        worst = worst.max(rel);
        cells += 1;
        if rel > 0.02 {
            bad.push(what);
        }
    };
    for (i, &(u, l_full, l_fov, y_full, y_fov)) in PUBLISHED.iter().enumerate() {
        cmp(parse_rate(&unc[i + 1]).unwrap(), u, format!("phase {i} uncompressed"));
        let (lf, lv) = split_pair(&low[i + 1]);
        let (yf, yv) = split_pair(&lossy[i + 1]);
        cmp(lf, l_full, format!("phase {i} 20:1 full"));
        cmp(yf, y_full, format!("phase {i} 300:1 full"));
        if let Some(p) = l_fov {
            cmp(lv, p, format!("phase {i} 20:1 fov"));
        }
        if let Some(p) = y_fov {
            cmp(yv, p, format!("phase {i} 300:1 fov"));
        }
    }

    // exact values: pixels x 3 colours x depth x refresh, two eyes for FoV
    let mut exact = 0;
    for (spec, &(w, h, ew, eh, bpc, hz)) in PhaseSpec::builtins().iter().zip(&DISPLAY) {
        let q = phase_requirements(spec, Ratio::from_integer(LOW_LATENCY_RATIO)).unwrap();
        let full = w * h * 3 * bpc * hz;
        let fov = 2 * ew * eh * 3 * bpc * hz;
        let want = [
            Ratio::from_integer(full),
            Ratio::new(full, 20),
            Ratio::new(fov, 20),
            Ratio::new(full, 300),
            Ratio::new(fov, 300),
        ];
        let got = [
            Ratio::from_integer(q.uncompressed_bps),
            q.full_view_compressed_bps,
            q.fov_compressed_bps,
            q.full_view_lossy_bps,
            q.fov_lossy_bps,
        ];
        exact += want.iter().zip(&got).filter(|(a, b)| a == b).count();
    }

    let pass = bad.is_empty() && cells == 23 && exact == 25;
    outcome(
        pass,
        format!("{cells} printed cells within 2% (worst {:.2}%), {exact}/25 exact rationals{}", worst * 100.0, if bad.is_empty() { String::new() } else { format!(", off: {bad:?}") }),
    )
}

// ---- path loss ---------------------------------------------------------

fn path_loss_forms() -> Outcome {
    let lg = f64::log10;
    let los = |d: f64, f: f64| 32.4 + 21.0 * lg(d) + 20.0 * lg(f);
    let nlos = |d: f64, f: f64| (32.4 + 31.9 * lg(d) + 20.0 * lg(f)).max(los(d, f));
    let mut worst: f64 = 0.0;
    let mut track = |a: f64, b: f64| worst = worst.max((a - b).abs());

    // hand-evaluated anchors
    let anchors = (pathloss_los(100.0, 28.0).unwrap(), pathloss_nlos(100.0, 28.0).unwrap());
    let anchors_ok = (anchors.0 - 103.343_f64).abs() < 5e-4 && (anchors.1 - 125.143_f64).abs() < 5e-4;

    for &f in &[3.5, 28.0, 39.0, 60.0, 73.0] {
        for k in 0..200 {
            let d = 10f64.powf(k as f64 / 50.0);
            track(pathloss_los(d, f).unwrap(), los(d, f));
            track(pathloss_nlos(d, f).unwrap(), nlos(d, f));

            // beyond the breakpoint the LoS law switches to 40 log10 d
            let (hb, hu) = (10.0, 1.5);
            let bp = 4.0 * (hb - 1.0) * (hu - 1.0) * f * 1e9 / SPEED_OF_LIGHT;
            track(breakpoint_distance(f, hb, hu), bp);
            let d2 = d * 30.0;
            let d3 = (d2 * d2 + (hb - hu) * (hb - hu)).sqrt();
            let want = if d2 <= bp { los(d3, f) } else { 32.4 + 40.0 * lg(d3) + 20.0 * lg(f) - 9.5 * lg(bp * bp + (hb - hu) * (hb - hu)) };
            track(umi_los(d2, d3, f, hb, hu).unwrap(), want);
            track(umi_nlos(d2, d3, f, hb, hu).unwrap(), want.max(32.4 + 31.9 * lg(d3) + 20.0 * lg(f)));
        }
    }
    outcome(
        anchors_ok && worst <= 1e-9,
        format!("LoS 100 m @ 28 GHz = {:.3} dB, NLoS = {:.3} dB; max deviation {worst:.1e} dB over 5000 evaluations", anchors.0, anchors.1),
    )
}

// ---- sweep properties --------------------------------------------------

const USERS: [usize; 4] = [5, 10, 15, 20];
const SEEDS: u64 = 10;

type Key = (Discipline, Connectivity, TrafficKind);

fn curves() -> Vec<Key> {
    let mut v = Vec::new();
    for d in [Discipline::RoundRobin, Discipline::ProportionalFair] {
        for c in [Connectivity::Single, Connectivity::Dual] {
            for k in [TrafficKind::Vr, TrafficKind::TraditionalVideo] {
                v.push((d, c, k));
            }
        }
    }
    v
}

fn name(k: &Key) -> String {
    format!("{}/{}/{}", k.0.label(), k.1.label(), k.2.label())
}

struct Sweep {
    means: HashMap<(Key, usize), f64>,
    /// Per (scheduler, n_users, seed): frame prefixes of single and dual VR.
    vr_frames: HashMap<(Discipline, usize, u64), [Vec<u32>; 2]>,
    elapsed_s: f64,
}

fn sweep() -> Sweep {
    let t0 = Instant::now();
    let plan: Vec<(Key, usize, u64)> = curves()
        .into_iter()
        .flat_map(|k| USERS.into_iter().flat_map(move |n| (1..=SEEDS).map(move |s| (k, n, s))))
        .collect();
    let out: Vec<(f64, Option<Vec<u32>>)> = plan
        .par_iter()
        .map(|&(k, n, seed)| {
            let mut cfg = SimConfig { duration_s: DEFAULT_DURATION_S, n_users: n, seed, ..SimConfig::default() };
            cfg.scheduler.discipline = k.0;
            cfg.scheduler.connectivity = k.1;
            cfg.flow = FlowConfig::of_kind(k.2);
            let m = run(&cfg).unwrap();
            let frames = (k.2 == TrafficKind::Vr).then(|| m.frames.iter().map(|f| f.in_deadline).collect());
            (m.success_pct.unwrap(), frames)
        })
        .collect();

    let mut sums: HashMap<(Key, usize), f64> = HashMap::new();
    let mut vr_frames: HashMap<(Discipline, usize, u64), [Vec<u32>; 2]> = HashMap::new();
    for (&(k, n, seed), (pct, frames)) in plan.iter().zip(out) {
        *sums.entry((k, n)).or_default() += pct;
        if let Some(f) = frames {
            let slot = vr_frames.entry((k.0, n, seed)).or_default();
            slot[(k.1 == Connectivity::Dual) as usize] = f;
        }
    }
    let means = sums.into_iter().map(|(k, s)| (k, s / SEEDS as f64)).collect();
    Sweep { means, vr_frames, elapsed_s: t0.elapsed().as_secs_f64() }
}

fn monotone(s: &Sweep) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for k in curves() {
        for w in USERS.windows(2) {
            let rise = s.means[&(k, w[1])] - s.means[&(k, w[0])];
            worst = worst.max(rise);
            if rise > 1.0 {
                bad.push(format!("{} {}->{}", name(&k), w[0], w[1]));
            }
        }
    }
    outcome(bad.is_empty(), format!("largest increase {worst:+.2} pp over 8 curves{}", fmt_bad(&bad)))
}

fn traffic_order(s: &Sweep) -> Outcome {
    let mut margin = f64::INFINITY;
    let mut bad = Vec::new();
    for d in [Discipline::RoundRobin, Discipline::ProportionalFair] {
        for c in [Connectivity::Single, Connectivity::Dual] {
            for n in USERS {
                let gap = s.means[&((d, c, TrafficKind::TraditionalVideo), n)] - s.means[&((d, c, TrafficKind::Vr), n)];
                margin = margin.min(gap);
                if gap < 0.0 {
                    bad.push(format!("{}/{} n={n}", d.label(), c.label()));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("smallest traditional - VR margin {margin:+.2} pp over 16 points{}", fmt_bad(&bad)))
}

fn dual_superset(s: &Sweep) -> Outcome {
    let mut frames = 0usize;
    let mut violations = 0usize;
    let mut improved = 0usize;
    for [single, dual] in s.vr_frames.values() {
        if single.len() != dual.len() {
            return outcome(false, "frame lists differ in length");
        }
        frames += single.len();
        for (a, b) in single.iter().zip(dual) {
            violations += (b < a) as usize;
            improved += (b > a) as usize;
        }
    }
    let mut mean_ok = true;
    let mut gain = f64::INFINITY;
    for d in [Discipline::RoundRobin, Discipline::ProportionalFair] {
        for n in USERS {
            let g = s.means[&((d, Connectivity::Dual, TrafficKind::Vr), n)] - s.means[&((d, Connectivity::Single, TrafficKind::Vr), n)];
            gain = gain.min(g);
            mean_ok &= g >= 0.0;
        }
    }
    outcome(
        violations == 0 && mean_ok && s.vr_frames.len() == 2 * USERS.len() * SEEDS as usize,
        format!("{frames} frames over {} seed pairs, {violations} violations, {improved} improved; smallest mean gain {gain:+.2} pp", s.vr_frames.len()),
    )
}

fn scheduler_gap(s: &Sweep) -> Outcome {
    let mut worst: f64 = 0.0;
    for c in [Connectivity::Single, Connectivity::Dual] {
        for k in [TrafficKind::Vr, TrafficKind::TraditionalVideo] {
            for n in USERS {
                let gap = s.means[&((Discipline::ProportionalFair, c, k), n)] - s.means[&((Discipline::RoundRobin, c, k), n)];
                worst = worst.max(gap.abs());
            }
        }
    }
    outcome(worst <= 5.0, format!("largest |PF - RR| {worst:.2} pp over 16 points"))
}

fn fmt_bad(bad: &[String]) -> String {
    if bad.is_empty() {
        String::new()
    } else {
        format!("; violated at {bad:?}")
    }
}

// ---- reference equivalence ---------------------------------------------

fn reference_equivalence() -> Outcome {
    let cfg = Config { cases: 100, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let cases = Cell::new(0);
    let planes = Cell::new(0u64);
    let res = runner.run(&micro(), |m| {
        let got = check(&m)?;
        cases.set(cases.get() + 1);
        planes.set(planes.get() + got.frames.iter().map(|f| f.n_planes as u64).sum::<u64>());
        Ok(())
    });
    let (cases, planes) = (cases.get(), planes.get());
    match res {
        Ok(()) => outcome(cases == 100, format!("{cases} random scenarios, {planes} bitplanes, identical counts and frame outcomes")),
        Err(e) => outcome(false, format!("{e}")),
    }
}

// ---- conservation and determinism --------------------------------------

#[derive(Default)]
struct Audit {
    ttis: u64,
    broken: u64,
    ledger: BitLedger,
}

impl Observer for Audit {
    fn on_tti(&mut self, r: &TtiReport<'_>) {
        let l = r.ledger;
        let served: u64 = r.served.iter().map(|s| s.bits_served).sum();
        let balanced = l.enqueued == l.transmitted + l.expired + l.cancelled + r.queued_bits;
        let stepped = served == l.transmitted - self.ledger.transmitted && r.tti == self.ttis;
        self.broken += (!balanced || !stepped) as u64;
        self.ttis += 1;
        self.ledger = l;
    }
}

fn sweep_file(dir: &Path, tag: &str) -> Vec<u8> {
    let text = format!(
        r#"
        [experiment]
        n_users = [4, 8]
        seeds = [1, 2, 3]
        output = "{}"
        [sim]
        duration_s = 0.5
        warmup_s = 0.1
        "#,
        dir.join(format!("{tag}.csv")).display()
    );
    let spec = parse_config_str(&text, dir).unwrap();
    let jobs = if tag == "a" { Some(1) } else { None };
    run_experiment(&spec, jobs, None).unwrap();
    std::fs::read(dir.join(format!("{tag}.csv"))).unwrap()
}

fn conservation_and_determinism() -> Outcome {
    let mut ttis = 0;
    let mut broken = 0;
    let mut cancelled = 0;
    for (d, c) in [(Discipline::RoundRobin, Connectivity::Single), (Discipline::ProportionalFair, Connectivity::Dual)] {
        let mut cfg = SimConfig { duration_s: 2.0, warmup_s: 0.5, n_users: 12, seed: 7, ..SimConfig::default() };
        cfg.scheduler.discipline = d;
        cfg.scheduler.connectivity = c;
        let mut audit = Audit::default();
        run_observed(&cfg, Some(&mut audit)).unwrap();
        ttis += audit.ttis;
        broken += audit.broken;
        cancelled += audit.ledger.cancelled;
    }
    let dir = tempfile::tempdir().unwrap();
    let a = sweep_file(dir.path(), "a");
    let b = sweep_file(dir.path(), "b");
    let same = a == b && !a.is_empty();
    outcome(
        broken == 0 && ttis == 32_000 && cancelled > 0 && same,
        format!("{ttis} audited TTIs, {broken} imbalanced; sweep CSV byte-identical across two invocations: {same}"),
    )
}

// ---- geometry ----------------------------------------------------------

fn geometry_oracle() -> Outcome {
    let t = common::geom::convex_pairs(0xacce, 10_000);
    outcome(
        t.cases == 10_000,
        format!("{} pairs agree on crossings, indoor length, parity and reversal ({} obstructed)", t.cases, t.crossed),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1  requirement table", guarded(requirement_table)));
    results.push(("2  path-loss closed forms", guarded(path_loss_forms)));

    match catch_unwind(sweep) {
        Ok(s) => {
            println!("sweep: 8 curves x {} user counts x {SEEDS} seeds, {DEFAULT_DURATION_S} s sessions, {:.1} s", USERS.len(), s.elapsed_s);
            for k in curves() {
                let row: Vec<String> = USERS.iter().map(|&n| format!("{:6.2}", s.means[&(k, n)])).collect();
                println!("  {:<24}{}", name(&k), row.join(" "));
            }
            results.push(("3a monotone load response", guarded(|| monotone(&s))));
            results.push(("3b traffic ordering", guarded(|| traffic_order(&s))));
            results.push(("3c dual connectivity superset", guarded(|| dual_superset(&s))));
            results.push(("3d scheduler similarity", guarded(|| scheduler_gap(&s))));
        }
        Err(_) => {
            for id in ["3a monotone load response", "3b traffic ordering", "3c dual connectivity superset", "3d scheduler similarity"] {
                results.push((id, outcome(false, "sweep panicked")));
            }
        }
    }

    results.push(("4  reference equivalence", guarded(reference_equivalence)));
    results.push(("5  conservation and determinism", guarded(conservation_and_determinism)));
    results.push(("6  geometry oracle", guarded(geometry_oracle)));

    let mut failed = 0;
    for (id, o) in &results {
        println!("{} {id}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.pass) as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
