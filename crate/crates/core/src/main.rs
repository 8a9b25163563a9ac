use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use maxweight_lab::analysis::{build_report, run_sweep, write_sweep_csv};
use maxweight_lab::config::SimConfig;
use maxweight_lab::experiment::run_experiment;
use maxweight_lab::fluid::{
    fluid_burst, run_bursts, summarize_bursts, write_burst_csv, BurstTolerance,
};
use maxweight_lab::mg1::{fit_scaling, simulate_workload, Mg1Config};
use maxweight_lab::region::classify;
use maxweight_lab::report::{to_json, write_json};
use maxweight_lab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "maxweight-lab",
    version,
    about = "Max-Weight switched-queue experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Horizon in slots; overrides the configuration.
    #[arg(long, global = true, value_name = "N")]
    horizon: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for replications (0 = all cores).
    #[arg(
        long,
        global = true,
        value_name = "N",
        env = "MAXWEIGHT_LAB_THREADS",
        default_value_t = 0
    )]
    threads: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured replications and write estimator reports.
    Simulate,
    /// Rerun the configuration over a grid of queue-2 rates.
    Sweep {
        /// Comma-separated λ₂ values; empty for a header-only CSV.
        #[arg(long, value_name = "LIST", default_value = "")]
        lambda2: String,
    },
    /// Burst-conditioned simulations against the fluid trajectory, one per
    /// seed from the master seed on.
    Burst {
        /// Burst size; defaults to `probes.burst_b`.
        #[arg(long)]
        b: Option<u64>,
        /// Number of seeds; defaults to the configured replications.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Fluid trajectory of a burst.
    Fluid {
        /// Comma-separated rates λ₁,λ₂,λ₃; defaults to the configuration.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        lambda: Option<Vec<f64>>,
        #[arg(long)]
        b: Option<f64>,
    },
    /// Stability region and delay-stability verdicts.
    Region {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        lambda: Option<Vec<f64>>,
    },
    /// M/GI/1 workload growth bench.
    Mg1 {
        #[arg(long)]
        replications: Option<u32>,
        #[arg(long)]
        gamma: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{msg}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn read_sim_config(g: &Global) -> Result<SimConfig> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config is required for this command"))?;
    let text =
        fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let mut cfg = SimConfig::from_json(&text)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(h) = g.horizon {
        cfg.horizon = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(g: &Global, config: Option<&SimConfig>) -> Result<PathBuf> {
    let dir = g
        .out
        .clone()
        .or_else(|| {
            config
                .and_then(|c| c.outputs.dir.clone())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Prints `value` as JSON and, with `--out`, also writes it to `name`.
fn emit<T: Serialize>(g: &Global, name: &str, value: &T) -> Result<()> {
    print!("{}", to_json(value)?);
    if let Some(dir) = &g.out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join(name), value)?;
    }
    Ok(())
}

fn input_digest<T: Serialize>(inputs: &T) -> Result<String> {
    use sha2::{Digest, Sha256};
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(inputs)?)))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::Simulate => {
            let cfg = read_sim_config(g)?;
            let dir = out_dir(g, Some(&cfg))?;
            let out = run_experiment(&cfg, g.threads, Some(&dir))?;
            let report = build_report(&cfg, &out);
            for q in &report.queues {
                q.queue_curve
                    .write_csv(create(&dir.join(format!("curve_queue{}.csv", q.queue)))?)?;
                q.delay_curve
                    .write_csv(create(&dir.join(format!("curve_delay{}.csv", q.queue)))?)?;
            }
            let path = dir.join("report.json");
            write_json(&path, &report)?;
            println!("{}", path.display());
        }
        Cmd::Sweep { lambda2 } => {
            let cfg = read_sim_config(g)?;
            let grid = parse_list(&lambda2)?;
            let dir = out_dir(g, Some(&cfg))?;
            let report = run_sweep(&cfg, &grid, g.threads)?;
            write_sweep_csv(create(&dir.join("sweep.csv"))?, &report.points)?;
            let path = dir.join("sweep.json");
            write_json(&path, &report)?;
            println!("{}", path.display());
        }
        Cmd::Burst { b, seeds } => {
            let cfg = read_sim_config(g)?;
            let b = b
                .or(cfg.probes.burst_b)
                .ok_or_else(|| Error::config("burst size needed: --b or probes.burst_b"))?;
            let n = seeds.unwrap_or(u64::from(cfg.replications));
            let seed_list: Vec<u64> = (0..n).map(|i| cfg.seed.wrapping_add(i)).collect();
            let tol = BurstTolerance::default();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(g.threads)
                .build()
                .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
            let runs = pool.install(|| run_bursts(&cfg.arrivals, b, &seed_list, &tol))?;
            let dir = out_dir(g, Some(&cfg))?;
            write_burst_csv(create(&dir.join("burst.csv"))?, &runs)?;
            let report = json!({
                "config_digest": cfg.digest(),
                "seed": cfg.seed,
                "b": b,
                "tolerance": tol,
                "summary": summarize_bursts(&runs, &tol),
                "runs": runs,
            });
            let path = dir.join("burst.json");
            write_json(&path, &report)?;
            println!("{}", path.display());
        }
        Cmd::Fluid { lambda, b } => {
            let cfg = g.config.as_ref().map(|_| read_sim_config(g)).transpose()?;
            let lambda = match (lambda, &cfg) {
                (Some(l), _) => l,
                (None, Some(c)) => c.rates(),
                (None, None) => return Err(Error::config("rates needed: --lambda or --config")),
            };
            let b = b
                .or_else(|| {
                    cfg.as_ref()
                        .and_then(|c| c.probes.burst_b)
                        .map(|v| v as f64)
                })
                .ok_or_else(|| Error::config("burst size needed: --b or probes.burst_b"))?;
            let traj = fluid_burst(&lambda, b)?;
            let digest = match &cfg {
                Some(c) => c.digest(),
                None => input_digest(&json!({ "lambda": lambda, "b": b }))?,
            };
            let report = json!({ "config_digest": digest, "seed": cfg.as_ref().map(|c| c.seed), "trajectory": traj });
            emit(g, "fluid.json", &report)?;
        }
        Cmd::Region { lambda } => {
            let cfg = g.config.as_ref().map(|_| read_sim_config(g)).transpose()?;
            let lambda = match (lambda, &cfg) {
                (Some(l), _) => l,
                (None, Some(c)) => c.rates(),
                (None, None) => return Err(Error::config("rates needed: --lambda or --config")),
            };
            let verdict = classify(&lambda, 1)?;
            let digest = match &cfg {
                Some(c) => c.digest(),
                None => input_digest(&json!({ "lambda": lambda }))?,
            };
            let report = json!({ "config_digest": digest, "seed": cfg.as_ref().map(|c| c.seed), "verdict": verdict });
            emit(g, "region.json", &report)?;
        }
        Cmd::Mg1 {
            replications,
            gamma,
        } => {
            let mut cfg = match &g.config {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<Mg1Config>(&text)
                        .map_err(|e| Error::config(e.to_string()))?
                }
                None => Mg1Config::default(),
            };
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            if let Some(h) = g.horizon {
                cfg.horizon = h;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            if let Some(v) = gamma {
                cfg.gamma = v;
            }
            let params = cfg.params();
            params.validate()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(g.threads)
                .build()
                .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
            let trace = pool.install(|| simulate_workload(&params))?;
            let scaling = fit_scaling(&trace, cfg.gamma)?;
            let dir = out_dir(g, None)?;
            trace.write_csv(create(&dir.join("mg1_trace.csv"))?)?;
            let report = json!({
                "config_digest": cfg.digest(),
                "seed": cfg.seed,
                "config": cfg,
                "trace": trace,
                "scaling": scaling,
            });
            let path = dir.join("mg1.json");
            write_json(&path, &report)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::config(format!("not a number: {t:?}")))
        })
        .collect()
}
