use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vrcell::experiment::{self, ConfigError, ExperimentSpec};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Downlink VR delivery simulator for mmWave cellular networks.
#[derive(Parser)]
#[command(name = "vrcell", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file and write the results CSV.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Results CSV path (overrides `experiment.output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write the per-TTI schedule of the first run to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Directory against which relative output paths are resolved.
        #[arg(long, env = "VRCELL_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Print the per-phase QoS requirement table as CSV.
    QosTable {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "VRCELL_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Check a config file and report the planned run count.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Session length in seconds (full sessions are 300).
    #[arg(long, allow_hyphen_values = true)]
    duration: Option<f64>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<vrcell::Error> for Failure {
    fn from(e: vrcell::Error) -> Self {
        match e {
            vrcell::Error::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn resolve(dir: Option<&Path>, path: &Path) -> PathBuf {
    match dir {
        Some(d) if path.is_relative() => d.join(path),
        _ => path.to_path_buf(),
    }
}

fn load(config: &Path, o: &Overrides) -> Result<ExperimentSpec, Failure> {
    let mut spec = experiment::parse_config(config)?;
    if let Some(seed) = o.seed {
        spec.seeds = vec![seed];
    }
    if let Some(d) = o.duration {
        spec.base.duration_s = d;
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("vrcell: configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("vrcell: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, overrides, out, jobs, trace, out_dir } => {
            let mut spec = load(&config, &overrides)?;
            let dir = out_dir.as_deref();
            spec.output = resolve(dir, out.as_deref().unwrap_or(&spec.output));
            spec.per_run_output = spec.per_run_output.as_deref().map(|p| resolve(dir, p));
            let trace = trace.map(|p| resolve(dir, &p));
            if jobs == Some(0) {
                return Err(Failure::Config("--jobs must be at least 1".into()));
            }
            eprintln!("vrcell: {} runs planned", spec.planned_runs());
            let res = experiment::run_experiment(&spec, jobs, trace.as_deref())?;
            for p in &res.points {
                let r = &p.replication;
                let fmt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
                println!(
                    "{:>4} users  {:<22} {:>7} %  [{}, {}]",
                    p.n_users,
                    p.curve.label(),
                    fmt(r.mean),
                    fmt(r.ci95_low),
                    fmt(r.ci95_high)
                );
            }
            eprintln!("vrcell: wrote {} ({})", spec.output.display(), res.fingerprint);
            Ok(())
        }
        Command::QosTable { out, out_dir } => {
            let csv = experiment::emit_qos_table()?;
            match out {
                Some(p) => {
                    let p = resolve(out_dir.as_deref(), &p);
                    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                        std::fs::create_dir_all(parent).map_err(|e| Failure::Runtime(format!("{}: {e}", parent.display())))?;
                    }
                    std::fs::write(&p, csv).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Validate { config, overrides } => {
            let spec = load(&config, &overrides)?;
            println!(
                "ok: {} curves x {} user counts x {} seeds = {} runs, fingerprint {}",
                spec.curves.len(),
                spec.n_users.len(),
                spec.seeds.len(),
                spec.planned_runs(),
                experiment::fingerprint(&spec)
            );
            Ok(())
        }
    }
}
