//! Experiment runners behind the CLI subcommands. Each returns its rows in
//! sweep order; writing them is left to the caller.

use super::config::{CapacityMode, ExperimentConfig, SweepVariable};
use super::output::{CapacityRow, LinkEcho, ResultRow};
use crate::codesign::{capacity_with_solver, Solver};
use crate::error::Error;
use crate::prediction::evaluate_trace;
use anyhow::{bail, Context};
use std::io::Read;

pub const CO_DESIGN: &str = "co-design";
pub const NO_PREDICTION: &str = "no-prediction";
pub const FIXED_HORIZON: &str = "fixed-horizon";

fn expect_variable(cfg: &ExperimentConfig, want: SweepVariable) -> anyhow::Result<Vec<f64>> {
    if cfg.sweep.variable != want {
        bail!(
            "sweep.variable is {:?} but this experiment sweeps {:?}",
            cfg.sweep.variable,
            want
        );
    }
    cfg.sweep.grid.values().context("sweep.grid")
}

/// Error components against the prediction horizon (ms) at the configured
/// bandwidth.
pub fn run_sweep_horizon(cfg: &ExperimentConfig) -> anyhow::Result<Vec<ResultRow>> {
    let grid = expect_variable(cfg, SweepVariable::Horizon)?;
    let mut scenario = cfg.scenario.to_scenario()?;
    let horizons = grid
        .iter()
        .map(|&ms| cfg.scenario.slots(ms, "sweep.grid"))
        .collect::<anyhow::Result<Vec<u32>>>()?;
    scenario.horizon_cap = scenario
        .horizon_cap
        .max(horizons.iter().copied().max().unwrap_or(0));
    let echo = LinkEcho::of(&scenario.link);
    let solver = Solver::new(scenario)?;
    let bandwidth = cfg.scenario.bandwidth_hz();
    Ok(grid
        .iter()
        .zip(horizons)
        .map(|(&ms, t)| {
            ResultRow::new(
                FIXED_HORIZON,
                ms,
                echo,
                solver.evaluate_horizon(t, bandwidth),
            )
        })
        .collect())
}

/// Co-design against the no-prediction baseline for each delay bound (ms).
pub fn run_tradeoff(cfg: &ExperimentConfig) -> anyhow::Result<Vec<ResultRow>> {
    let grid = expect_variable(cfg, SweepVariable::DMax)?;
    let bandwidth = cfg.scenario.bandwidth_hz();
    let mut rows = Vec::with_capacity(2 * grid.len());
    for &ms in &grid {
        let mut scenario = cfg.scenario.to_scenario()?;
        scenario.budget.d_max = cfg.scenario.slots(ms, "sweep.grid")?;
        let echo = LinkEcho::of(&scenario.link);
        let solver = Solver::new(scenario)?;
        rows.push(ResultRow::new(
            CO_DESIGN,
            ms,
            echo,
            solver.min_overall_error(bandwidth),
        ));
        rows.push(ResultRow::new(
            NO_PREDICTION,
            ms,
            echo,
            solver.evaluate_horizon(0, bandwidth),
        ));
    }
    Ok(rows)
}

/// Near-optimal overall error for each bandwidth (MHz).
pub fn run_sweep_bandwidth(cfg: &ExperimentConfig) -> anyhow::Result<Vec<ResultRow>> {
    let grid = expect_variable(cfg, SweepVariable::Bandwidth)?;
    let solver = Solver::new(cfg.scenario.to_scenario()?)?;
    let echo = LinkEcho::of(&solver.scenario().link);
    Ok(grid
        .iter()
        .map(|&mhz| ResultRow::new(CO_DESIGN, mhz, echo, solver.min_overall_error(mhz * 1e6)))
        .collect())
}

/// Total bandwidth (worst case) or exceedance probability (random
/// placement) for each device count.
pub fn run_capacity(cfg: &ExperimentConfig, workers: usize) -> anyhow::Result<Vec<CapacityRow>> {
    let grid = expect_variable(cfg, SweepVariable::NDevices)?;
    let counts = grid
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                Ok(v as u32)
            } else {
                bail!("device count {v} is not a positive integer")
            }
        })
        .collect::<anyhow::Result<Vec<u32>>>()?;
    let solver = Solver::new(cfg.scenario.to_scenario()?)?;
    let echo = LinkEcho::of(&solver.scenario().link);
    let cap = &cfg.capacity;
    match cap.mode {
        CapacityMode::WorstCase => {
            let single = solver.min_bandwidth();
            Ok(counts
                .into_iter()
                .map(|n| {
                    let (total, note) = match &single {
                        Ok(sol) => (Some(f64::from(n) * sol.bandwidth), String::new()),
                        Err(e) => (None, e.to_string()),
                    };
                    CapacityRow {
                        n_devices: n,
                        mode: "worst_case",
                        total_bandwidth: total,
                        exceed_prob: None,
                        draws: None,
                        seed: None,
                        link: echo,
                        note,
                    }
                })
                .collect())
        }
        CapacityMode::KnownDistribution => {
            let deployment = cfg.scenario.deployment(cap)?;
            counts
                .into_iter()
                .map(|n| {
                    let p = capacity_with_solver(
                        &solver,
                        &deployment,
                        n,
                        cap.b_total_mhz * 1e6,
                        cap.draws,
                        cfg.seed,
                        workers,
                    )?;
                    Ok(CapacityRow {
                        n_devices: n,
                        mode: "known_distribution",
                        total_bandwidth: None,
                        exceed_prob: Some(p.value()),
                        draws: Some(cap.draws),
                        seed: Some(cfg.seed),
                        link: echo,
                        note: String::new(),
                    })
                })
                .collect::<Result<Vec<_>, Error>>()
                .map_err(Into::into)
        }
    }
}

/// Reads a single-column CSV of positions. A first line that is not a
/// number is taken as a header.
pub fn read_trace<R: Read>(input: R) -> anyhow::Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => bail!("line {}: {field:?} is not a number", i + 1),
        }
    }
    Ok(out)
}

/// Empirical prediction error of a recorded trace for each horizon.
pub fn run_eval_trace(
    locations: &[f64],
    slot_ms: f64,
    horizons: &[u32],
    threshold: f64,
) -> anyhow::Result<Vec<(u32, f64, f64)>> {
    horizons
        .iter()
        .map(|&h| {
            let e = evaluate_trace(locations, slot_ms * 1e-3, h, threshold)?;
            Ok((h, threshold, e.value()))
        })
        .collect()
}
