//! Sweep execution and result files.

use std::fmt::Write as _;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{Curve, ExperimentSpec, MapSource};
use crate::engine::{run, run_observed, Counts, Observer, Replication, TtiReport};
use crate::qos::qos_table_csv;
use crate::{Error, Result};

/// Aggregate of one (curve, user count) sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub curve: Curve,
    pub n_users: usize,
    pub replication: Replication,
}

/// One simulated session.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub curve: Curve,
    pub n_users: usize,
    pub seed: u64,
    pub counts: Counts,
    pub success_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Curve-major, then user count, in spec order.
    pub points: Vec<PointResult>,
    /// Same order as `points`, seeds innermost.
    pub runs: Vec<RunRecord>,
    /// `sha256:<hex>` of the resolved configuration.
    pub fingerprint: String,
}

/// Every resolved setting that can influence results, as `key = value`.
pub fn describe(spec: &ExperimentSpec) -> Vec<(String, String)> {
    let mut kv: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
    let list = |xs: Vec<String>| format!("[{}]", xs.join(", "));

    put("experiment.n_users", list(spec.n_users.iter().map(|n| n.to_string()).collect()));
    put("experiment.curves", list(spec.curves.iter().map(Curve::label).collect()));
    put("experiment.seeds", list(spec.seeds.iter().map(|s| s.to_string()).collect()));

    let b = &spec.base;
    put("sim.duration_s", format!("{:?}", b.duration_s));
    put("sim.warmup_s", format!("{:?}", b.warmup_s));

    let map = match &spec.map_source {
        MapSource::Campus => "campus".to_string(),
        MapSource::File(p) => p.display().to_string(),
    };
    put("scenario.map", map);
    let mut h = Sha256::new();
    let bounds = b.site.map.bounds();
    h.update(format!("{:?} {:?} {:?} {:?}\n", bounds.min.x, bounds.min.y, bounds.max.x, bounds.max.y));
    for poly in b.site.map.buildings() {
        for v in poly.vertices() {
            h.update(format!("{:?},{:?} ", v.x, v.y));
        }
        h.update("\n");
    }
    put("scenario.map_sha256", hex::encode(h.finalize()));
    put(
        "scenario.base_stations",
        list(b.site.base_stations.iter().map(|p| format!("[{:?}, {:?}, {:?}]", p.xy.x, p.xy.y, p.height)).collect()),
    );
    put("scenario.user_height_m", format!("{:?}", b.site.user_height_m));

    let c = &b.channel;
    for (k, v) in [
        ("carrier_ghz", c.carrier_ghz),
        ("bandwidth_hz", c.bandwidth_hz),
        ("tx_power_dbm", c.tx_power_dbm),
        ("tx_gain_db", c.tx_gain_db),
        ("rx_gain_db", c.rx_gain_db),
        ("noise_figure_db", c.noise_figure_db),
        ("shadowing_sigma_los_db", c.shadowing_sigma_los_db),
        ("shadowing_sigma_nlos_db", c.shadowing_sigma_nlos_db),
        ("wall_loss_db", c.wall_loss_db),
        ("indoor_loss_db_per_m", c.indoor_loss_db_per_m),
        ("se_max", c.se_max),
    ] {
        put(&format!("channel.{k}"), format!("{v:?}"));
    }

    put("scheduler.tti_s", format!("{:?}", b.scheduler.tti_s));
    put("scheduler.pf_time_constant_ttis", b.scheduler.pf_time_constant_ttis.to_string());

    for flow in [&spec.vr_flow, &spec.traditional_flow] {
        let p = format!("traffic.{}", flow.kind.label());
        put(&format!("{p}.bit_rate_bps"), format!("{:?}", flow.bit_rate_bps));
        put(&format!("{p}.refresh_hz"), format!("{:?}", flow.refresh_hz));
        put(&format!("{p}.bitplane_bits"), flow.bitplane_bits.to_string());
        put(&format!("{p}.deadline_ms"), format!("{:?}", flow.deadline_ms));
        put(&format!("{p}.prefetch_ms"), format!("{:?}", flow.prefetch_ms));
        put(&format!("{p}.drop_on_expiry"), flow.drop_on_expiry.to_string());
    }
    kv
}

pub fn fingerprint(spec: &ExperimentSpec) -> String {
    let mut h = Sha256::new();
    for (k, v) in describe(spec) {
        h.update(format!("{k} = {v}\n"));
    }
    format!("sha256:{}", hex::encode(h.finalize()))
}

fn header(spec: &ExperimentSpec, fingerprint: &str) -> String {
    let mut s = String::from("# vrcell sweep\n");
    for (k, v) in describe(spec) {
        let _ = writeln!(s, "# {k} = {v}");
    }
    let _ = writeln!(s, "# fingerprint = {fingerprint}");
    s
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Writes `contents` next to `path` and renames it into place, so an
/// aborted write never leaves a partial file.
fn write_atomic(path: &Path, contents: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        contents(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

struct TraceWriter<W: Write> {
    out: csv::Writer<W>,
    error: Option<csv::Error>,
}

impl<W: Write> Observer for TraceWriter<W> {
    fn on_tti(&mut self, report: &TtiReport<'_>) {
        if self.error.is_some() {
            return;
        }
        for s in report.served {
            let row = [
                report.tti.to_string(),
                s.bs.to_string(),
                s.band.index().to_string(),
                s.user.to_string(),
                format!("{:.3}", s.rate_bps),
                s.bits_served.to_string(),
            ];
            if let Err(e) = self.out.write_record(&row) {
                self.error = Some(e);
                return;
            }
        }
    }
}

/// Runs every planned session and writes the aggregate CSV (and the
/// per-run CSV when configured).
///
/// `jobs` bounds the worker pool (default: all cores). `trace`, when given,
/// receives the per-TTI schedule of the first planned run.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>, trace: Option<&Path>) -> Result<SweepResult> {
    spec.validate()?;
    let fp = fingerprint(spec);

    let plan: Vec<(Curve, usize, u64)> = spec
        .curves
        .iter()
        .flat_map(|&c| spec.n_users.iter().flat_map(move |&n| spec.seeds.iter().map(move |&s| (c, n, s))))
        .collect();

    let exec = || -> Result<Vec<RunRecord>> {
        plan.par_iter()
            .map(|&(curve, n_users, seed)| {
                let m = run(&spec.sim_config(&curve, n_users, seed))?;
                Ok(RunRecord { curve, n_users, seed, counts: m.totals, success_pct: m.success_pct })
            })
            .collect()
    };
    let runs = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid("jobs", e.to_string()))?
            .install(exec)?,
        None => exec()?,
    };

    let points: Vec<PointResult> = runs
        .chunks(spec.seeds.len())
        .map(|chunk| PointResult {
            curve: chunk[0].curve,
            n_users: chunk[0].n_users,
            replication: Replication::from_values(chunk.iter().map(|r| r.success_pct).collect()),
        })
        .collect();

    let head = header(spec, &fp);
    write_atomic(&spec.output, |w| {
        w.write_all(head.as_bytes()).map_err(|e| Error::io(&spec.output, e))?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "n_users", "scheduler", "connectivity", "traffic", "mean_success_pct", "stddev", "ci95_low", "ci95_high", "runs",
        ])?;
        for p in &points {
            let r = &p.replication;
            out.write_record([
                p.n_users.to_string(),
                p.curve.scheduler.label().to_string(),
                p.curve.connectivity.label().to_string(),
                p.curve.traffic.label().to_string(),
                fmt_opt(r.mean),
                fmt_opt(r.stddev),
                fmt_opt(r.ci95_low),
                fmt_opt(r.ci95_high),
                r.runs.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io(&spec.output, e))?;
        Ok(())
    })?;

    if let Some(path) = &spec.per_run_output {
        write_atomic(path, |w| {
            w.write_all(head.as_bytes()).map_err(|e| Error::io(path, e))?;
            let mut out = csv::Writer::from_writer(w);
            out.write_record([
                "n_users", "scheduler", "connectivity", "traffic", "seed", "success_pct", "generated",
                "delivered_in_deadline", "delivered_late", "expired", "in_flight_at_end",
            ])?;
            for r in &runs {
                let c = &r.counts;
                out.write_record([
                    r.n_users.to_string(),
                    r.curve.scheduler.label().to_string(),
                    r.curve.connectivity.label().to_string(),
                    r.curve.traffic.label().to_string(),
                    r.seed.to_string(),
                    fmt_opt(r.success_pct),
                    c.generated.to_string(),
                    c.delivered_in_deadline.to_string(),
                    c.delivered_late.to_string(),
                    c.expired.to_string(),
                    c.in_flight_at_end.to_string(),
                ])?;
            }
            out.flush().map_err(|e| Error::io(path, e))?;
            Ok(())
        })?;
    }

    if let Some(path) = trace {
        let (curve, n_users, seed) = plan[0];
        let cfg = spec.sim_config(&curve, n_users, seed);
        write_atomic(path, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["tti", "bs", "band", "user", "rate_bps", "bits_served"])?;
            let mut tw = TraceWriter { out, error: None };
            run_observed(&cfg, Some(&mut tw))?;
            if let Some(e) = tw.error {
                return Err(e.into());
            }
            tw.out.flush().map_err(|e| Error::io(path, e))?;
            Ok(())
        })?;
    }

    Ok(SweepResult { points, runs, fingerprint: fp })
}

/// Table of per-phase requirements as CSV.
pub fn emit_qos_table() -> Result<String> {
    qos_table_csv()
}
