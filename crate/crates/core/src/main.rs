use anyhow::Context;
use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use urllc_codesign::cli::config::ExperimentConfig;
use urllc_codesign::cli::{output, runners, validation};

#[derive(Parser)]
#[command(version, about = "Prediction and communication co-design experiments")]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; falls back to the configured output, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo work.
    #[arg(long, global = true, default_value_t = default_workers())]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error components against the prediction horizon.
    SweepHorizon,
    /// Co-design against the no-prediction baseline over the delay bound.
    Tradeoff,
    /// Bandwidth demand or exceedance probability against the device count.
    Capacity,
    /// Near-optimal overall error against the bandwidth.
    SweepBandwidth,
    /// Checks every model against its oracle; nonzero exit on failure.
    Validate,
    /// Empirical prediction error of a recorded position trace.
    EvalTrace {
        /// Single-column CSV of positions, one per slot.
        #[arg(long)]
        trace: PathBuf,
        /// Slot duration in milliseconds.
        #[arg(long, default_value_t = 0.1)]
        slot_ms: f64,
        /// Prediction horizons in slots.
        #[arg(long, value_delimiter = ',', required = true)]
        horizon: Vec<u32>,
        /// Location error threshold in metres.
        #[arg(long)]
        threshold: f64,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let workers = cli.workers.max(1);
    let out_path = cli.out.clone().or_else(|| cfg.output.clone());
    match cli.command {
        Command::SweepHorizon => output::write_results(
            sink(out_path.as_deref())?,
            &runners::run_sweep_horizon(&cfg)?,
        )?,
        Command::Tradeoff => {
            output::write_results(sink(out_path.as_deref())?, &runners::run_tradeoff(&cfg)?)?
        }
        Command::SweepBandwidth => output::write_results(
            sink(out_path.as_deref())?,
            &runners::run_sweep_bandwidth(&cfg)?,
        )?,
        Command::Capacity => output::write_capacity(
            sink(out_path.as_deref())?,
            &runners::run_capacity(&cfg, workers)?,
        )?,
        Command::EvalTrace {
            trace,
            slot_ms,
            horizon,
            threshold,
        } => {
            let file =
                File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let locations = runners::read_trace(file)?;
            let rows = runners::run_eval_trace(&locations, slot_ms, &horizon, threshold)?;
            output::write_trace_results(sink(out_path.as_deref())?, &rows)?;
        }
        Command::Validate => {
            let results = validation::run_validation(&cfg, workers)?;
            let mut w = sink(out_path.as_deref())?;
            let sc = &cfg.scenario;
            writeln!(
                w,
                "seed {} | data_fraction {} | snr_loss_db {}",
                cfg.seed, sc.data_fraction, sc.snr_loss_db
            )?;
            for r in &results {
                writeln!(w, "{r}")?;
            }
            let ok = validation::all_passed(&results);
            writeln!(
                w,
                "{}",
                if ok {
                    "validation passed"
                } else {
                    "validation FAILED"
                }
            )?;
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
