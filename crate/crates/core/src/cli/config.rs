//! Experiment configuration files (TOML, human units).
//!
//! Every field has a default, so an empty file describes the reference
//! single-device scenario: 23 dBm transmit power, −174 dBm/Hz noise,
//! 160-bit packets at 100 packets/s, 0.1 ms slots, 0.5 ms copies, 10 ms
//! core-network delay, a device 200 m away under worst-case shadowing, and
//! a constant-acceleration motion model.

use super::units::{db_to_linear, dbm_to_watts, ms_to_slots};
use crate::codesign::{DelayBudget, Deployment, DeviceScenario, Shadowing};
use crate::phy::{worst_case_gain, LinkModel, PathLossModel};
use crate::prediction::build_constant_accel_model;
use crate::queueing::TrafficModel;
use crate::specfun::Probability;
use anyhow::{bail, Context};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub sweep: SweepConfig,
    pub capacity: CapacityConfig,
    pub validation: ValidationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            output: None,
            scenario: ScenarioConfig::default(),
            sweep: SweepConfig::default(),
            capacity: CapacityConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub slot_ms: f64,
    pub copy_ms: f64,
    pub core_delay_ms: f64,
    pub d_max_ms: f64,
    pub decode_factor: f64,
    pub arrival_rate_pps: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub payload_bits: u32,
    pub n_antennas: u32,
    pub distance_m: f64,
    /// Replaces the worst-case gain at `distance_m` when set.
    pub large_scale_gain_db: Option<f64>,
    pub bandwidth_mhz: f64,
    pub data_fraction: f64,
    pub snr_loss_db: f64,
    pub reliability_target: f64,
    pub horizon_cap_ms: f64,
    pub bandwidth_cap_mhz: f64,
    pub subcarrier_khz: f64,
    pub repetition_cap: u32,
    pub path_loss: PathLossConfig,
    pub prediction: PredictionConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            slot_ms: 0.1,
            copy_ms: 0.5,
            core_delay_ms: 10.0,
            d_max_ms: 0.0,
            decode_factor: 0.0,
            arrival_rate_pps: 100.0,
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -174.0,
            payload_bits: 160,
            n_antennas: 32,
            distance_m: 200.0,
            large_scale_gain_db: None,
            bandwidth_mhz: 0.44,
            data_fraction: 1.0,
            snr_loss_db: 0.0,
            reliability_target: 1e-5,
            horizon_cap_ms: 40.0,
            bandwidth_cap_mhz: 10.0,
            subcarrier_khz: 15.0,
            repetition_cap: 20,
            path_loss: PathLossConfig::default(),
            prediction: PredictionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossConfig {
    pub fixed_loss_db: f64,
    pub distance_exponent_db: f64,
    pub shadowing_std_db: f64,
    pub availability_target: f64,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        PathLossConfig {
            fixed_loss_db: 35.3,
            distance_exponent_db: 37.6,
            shadowing_std_db: 8.0,
            availability_target: 1e-5,
        }
    }
}

impl PathLossConfig {
    pub fn to_model(&self) -> anyhow::Result<PathLossModel> {
        let model = PathLossModel {
            fixed_loss_db: self.fixed_loss_db,
            distance_exponent_db: self.distance_exponent_db,
            shadowing_std_db: self.shadowing_std_db,
            availability_target: Probability::new(self.availability_target)
                .context("scenario.path_loss.availability_target")?,
        };
        model.validate().context("scenario.path_loss")?;
        Ok(model)
    }
}

/// Location, velocity and acceleration in m, m/s and m/s². A threshold of
/// `inf` leaves that feature unmonitored.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionConfig {
    pub accel_noise_std: f64,
    pub thresholds: [f64; 3],
    pub initial_error_std: [f64; 3],
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            accel_noise_std: 0.01,
            thresholds: [0.1, f64::INFINITY, f64::INFINITY],
            initial_error_std: [0.01, 0.2, 0.1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Horizon,
    DMax,
    NDevices,
    Bandwidth,
}

/// Sweep values: an explicit list or an inclusive `{start, stop, step}`
/// range. Horizons and delay bounds are in ms, bandwidths in MHz.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> anyhow::Result<Vec<f64>> {
        match *self {
            Grid::List(ref v) => Ok(v.clone()),
            Grid::Range { start, stop, step } => {
                if !(step > 0.0) || stop < start {
                    bail!("grid range needs step > 0 and stop >= start");
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub grid: Grid,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            variable: SweepVariable::Horizon,
            grid: Grid::Range {
                start: 5.0,
                stop: 150.0,
                step: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    WorstCase,
    KnownDistribution,
}

/// Shadowing of randomly placed devices: drawn per device, or fixed at the
/// availability quantile so only the distance varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowingMode {
    Sampled,
    WorstCase,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityConfig {
    pub mode: CapacityMode,
    pub shadowing: ShadowingMode,
    pub b_total_mhz: f64,
    pub draws: u64,
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    pub gain_step_db: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig {
            mode: CapacityMode::WorstCase,
            shadowing: ShadowingMode::WorstCase,
            b_total_mhz: 1.0,
            draws: 10_000,
            min_distance_m: 50.0,
            max_distance_m: 200.0,
            gain_step_db: 0.05,
        }
    }
}

/// Sizes and tolerances of the `validate` suite. Every tolerance is
/// multiplied by `tolerance_scale`; setting it to 0 demands exact agreement.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub tolerance_scale: f64,
    pub prediction_trials: u64,
    pub queue_slots: u64,
    pub random_cases: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            tolerance_scale: 1.0,
            prediction_trials: 1_000_000,
            queue_slots: 2_000_000,
            random_cases: 10,
        }
    }
}

impl ScenarioConfig {
    pub fn slots(&self, ms: f64, field: &str) -> anyhow::Result<u32> {
        ms_to_slots(ms, self.slot_ms).with_context(|| format!("scenario.{field}"))
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_mhz * 1e6
    }

    pub fn large_scale_gain(&self) -> anyhow::Result<f64> {
        match self.large_scale_gain_db {
            Some(db) => Ok(db_to_linear(db)),
            None => Ok(
                worst_case_gain(&self.path_loss.to_model()?, self.distance_m)
                    .context("scenario.distance_m")?,
            ),
        }
    }

    pub fn to_scenario(&self) -> anyhow::Result<DeviceScenario> {
        let slot_s = self.slot_ms * 1e-3;
        let p = &self.prediction;
        let state_model = build_constant_accel_model(
            slot_s,
            p.accel_noise_std,
            p.thresholds,
            p.initial_error_std,
        )
        .context("scenario.prediction")?;
        let traffic = TrafficModel::new(self.arrival_rate_pps * slot_s)
            .context("scenario.arrival_rate_pps")?;
        let link = LinkModel {
            bandwidth: self.bandwidth_hz(),
            tx_power: dbm_to_watts(self.tx_power_dbm),
            noise_psd: dbm_to_watts(self.noise_psd_dbm_hz),
            large_scale_gain: self.large_scale_gain()?,
            snr_loss: db_to_linear(self.snr_loss_db),
            n_antennas: self.n_antennas,
            data_fraction: self.data_fraction,
            payload_bits: self.payload_bits,
            slot_duration: slot_s,
            copy_duration: self.slots(self.copy_ms, "copy_ms")?,
        };
        link.validate().context("scenario link parameters")?;
        let scenario = DeviceScenario {
            state_model,
            traffic,
            link,
            budget: DelayBudget {
                d_max: self.slots(self.d_max_ms, "d_max_ms")?,
                d_core: self.slots(self.core_delay_ms, "core_delay_ms")?,
                decode_factor: self.decode_factor,
            },
            reliability_target: Probability::new(self.reliability_target)
                .context("scenario.reliability_target")?,
            horizon_cap: self.slots(self.horizon_cap_ms, "horizon_cap_ms")?,
            bandwidth_cap: self.bandwidth_cap_mhz * 1e6,
            repetition_cap: self.repetition_cap,
            subcarrier_bandwidth: self.subcarrier_khz * 1e3,
        };
        scenario.validate().context("scenario")?;
        Ok(scenario)
    }

    pub fn deployment(&self, capacity: &CapacityConfig) -> anyhow::Result<Deployment> {
        let d = Deployment {
            path_loss: self.path_loss.to_model()?,
            shadowing: match capacity.shadowing {
                ShadowingMode::Sampled => Shadowing::Sampled,
                ShadowingMode::WorstCase => Shadowing::WorstCase,
            },
            min_distance: capacity.min_distance_m,
            max_distance: capacity.max_distance_m,
            gain_step_db: capacity.gain_step_db,
        };
        d.validate().context("capacity")?;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_scenario() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        let s = cfg.scenario.to_scenario().unwrap();
        assert_eq!(s.budget.d_core, 100);
        assert_eq!(s.link.copy_duration, 5);
        assert_eq!(s.horizon_cap, 400);
        assert!((s.traffic.arrival_rate() - 0.01).abs() < 1e-15);
        assert!((s.link.large_scale_gain.log10() + 15.592).abs() < 0.002);
    }

    #[test]
    fn grid_forms() {
        let cfg = ExperimentConfig::from_toml(
            "[sweep]\nvariable = \"d_max\"\ngrid = { start = 0, stop = 2, step = 0.5 }\n",
        )
        .unwrap();
        assert_eq!(cfg.sweep.variable, SweepVariable::DMax);
        assert_eq!(
            cfg.sweep.grid.values().unwrap(),
            vec![0.0, 0.5, 1.0, 1.5, 2.0]
        );
        let cfg = ExperimentConfig::from_toml("[sweep]\ngrid = [1, 4, 9]\n").unwrap();
        assert_eq!(cfg.sweep.grid.values().unwrap(), vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn infinite_threshold_parses() {
        let cfg =
            ExperimentConfig::from_toml("[scenario.prediction]\nthresholds = [0.1, inf, 0.5]\n")
                .unwrap();
        assert!(cfg.scenario.prediction.thresholds[1].is_infinite());
    }

    #[test]
    fn unknown_field_is_reported_with_location() {
        let err = ExperimentConfig::from_toml("[scenario]\nslot_ms = 0.1\nbandwith_mhz = 1\n")
            .unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("bandwith_mhz"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn fractional_slot_durations_are_rejected() {
        let cfg = ExperimentConfig::from_toml("[scenario]\ncopy_ms = 0.55\n").unwrap();
        assert!(cfg.scenario.to_scenario().is_err());
    }
}
