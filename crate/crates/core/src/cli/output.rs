//! CSV rows written by the experiment runners.

use crate::codesign::CoDesignSolution;
use crate::error::Error;
use crate::phy::LinkModel;
use anyhow::{ensure, Context};
use std::io::Write;

pub const INFEASIBLE: &str = "infeasible";

/// The two link parameters with no agreed value, echoed on every row:
/// the fraction of resources carrying data and the SNR loss in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEcho {
    pub data_fraction: f64,
    pub snr_loss_db: f64,
}

impl LinkEcho {
    pub fn of(link: &LinkModel) -> Self {
        LinkEcho {
            data_fraction: link.data_fraction,
            snr_loss_db: 10.0 * link.snr_loss.log10(),
        }
    }

    fn fields(&self) -> [String; 2] {
        [
            format!("{}", self.data_fraction),
            format!("{}", self.snr_loss_db),
        ]
    }
}

/// One point of a sweep. Infeasible points keep their sweep value and
/// carry the reason instead of the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub series: String,
    pub sweep_value: f64,
    pub outcome: Result<CoDesignSolution, String>,
    pub link: LinkEcho,
}

impl ResultRow {
    pub fn new(
        series: &str,
        sweep_value: f64,
        link: LinkEcho,
        outcome: crate::error::Result<CoDesignSolution>,
    ) -> Self {
        ResultRow {
            series: series.to_owned(),
            sweep_value,
            outcome: outcome.map_err(|e: Error| e.to_string()),
            link,
        }
    }

    pub const HEADER: [&'static str; 16] = [
        "series",
        "sweep_value",
        "status",
        "eps_prediction",
        "eps_queue",
        "eps_tx",
        "eps_overall",
        "horizon",
        "queue_delay",
        "tx_delay",
        "repetitions",
        "bandwidth",
        "decode_delay",
        "data_fraction",
        "snr_loss_db",
        "note",
    ];

    pub fn check(&self) -> anyhow::Result<()> {
        if let Ok(sol) = &self.outcome {
            let parts = [
                sol.eps_prediction,
                sol.eps_queue,
                sol.eps_tx,
                sol.eps_overall,
            ];
            ensure!(
                parts.iter().all(|p| (0.0..=1.0).contains(&p.value())),
                "probability outside [0, 1] at sweep value {}",
                self.sweep_value
            );
            let sum = sol.eps_prediction.value() + sol.eps_queue.value() + sol.eps_tx.value();
            ensure!(
                sum >= 1.0 || (sum - sol.eps_overall.value()).abs() <= 1e-12,
                "error components do not add up at sweep value {}",
                self.sweep_value
            );
        }
        Ok(())
    }

    fn record(&self) -> Vec<String> {
        let mut rec = vec![self.series.clone(), format!("{}", self.sweep_value)];
        match &self.outcome {
            Ok(sol) => {
                rec.push("ok".into());
                for p in [
                    sol.eps_prediction,
                    sol.eps_queue,
                    sol.eps_tx,
                    sol.eps_overall,
                ] {
                    rec.push(format!("{:.9e}", p.value()));
                }
                rec.extend([
                    sol.horizon.to_string(),
                    sol.queue_delay.to_string(),
                    sol.tx_delay.to_string(),
                    sol.repetitions.to_string(),
                    format!("{}", sol.bandwidth),
                    sol.decode_delay.to_string(),
                ]);
                rec.extend(self.link.fields());
                rec.push(String::new());
            }
            Err(reason) => {
                rec.push(INFEASIBLE.into());
                rec.extend(std::iter::repeat_n(String::new(), 10));
                rec.extend(self.link.fields());
                rec.push(reason.clone());
            }
        }
        rec
    }
}

/// One device count of a capacity run.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub n_devices: u32,
    pub mode: &'static str,
    /// Total bandwidth in Hz (worst-case mode).
    pub total_bandwidth: Option<f64>,
    /// Probability that the devices need more than the available bandwidth
    /// (known-distribution mode).
    pub exceed_prob: Option<f64>,
    pub draws: Option<u64>,
    pub seed: Option<u64>,
    pub link: LinkEcho,
    pub note: String,
}

impl CapacityRow {
    pub const HEADER: [&'static str; 9] = [
        "n_devices",
        "mode",
        "total_bandwidth",
        "exceed_prob",
        "draws",
        "seed",
        "data_fraction",
        "snr_loss_db",
        "note",
    ];

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let mut rec = vec![
            self.n_devices.to_string(),
            self.mode.to_owned(),
            opt(self.total_bandwidth.map(|b| format!("{b}"))),
            opt(self.exceed_prob.map(|p| format!("{p:.9e}"))),
            opt(self.draws.map(|d| d.to_string())),
            opt(self.seed.map(|s| s.to_string())),
        ];
        rec.extend(self.link.fields());
        rec.push(self.note.clone());
        rec
    }
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ResultRow::HEADER)?;
    for row in rows {
        row.check()?;
        w.write_record(row.record())?;
    }
    w.flush().context("writing results")?;
    Ok(())
}

pub fn write_capacity<W: Write>(out: W, rows: &[CapacityRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CapacityRow::HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().context("writing results")?;
    Ok(())
}

/// Rows of a trace evaluation: horizon in slots and the empirical error.
pub fn write_trace_results<W: Write>(out: W, rows: &[(u32, f64, f64)]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["horizon", "threshold", "eps_prediction"])?;
    for (h, d, e) in rows {
        w.write_record([h.to_string(), format!("{d}"), format!("{e:.9e}")])?;
    }
    w.flush().context("writing results")?;
    Ok(())
}
