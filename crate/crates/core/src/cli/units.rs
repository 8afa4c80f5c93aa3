//! Conversions between the human units of configuration files and the
//! slot/linear units used by the models.

use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1e3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Whole number of slots in `ms` milliseconds. Durations that are not a
/// multiple of the slot length are rejected.
pub fn ms_to_slots(ms: f64, slot_ms: f64) -> Result<u32> {
    if !(slot_ms > 0.0) {
        return Err(Error::domain("ms_to_slots", "slot length must be positive"));
    }
    let slots = ms / slot_ms;
    let rounded = slots.round();
    if !(rounded >= 0.0 && rounded <= f64::from(u32::MAX)) || (slots - rounded).abs() > 1e-6 {
        return Err(Error::domain(
            "ms_to_slots",
            format!("{ms} ms is not a non-negative whole number of {slot_ms} ms slots"),
        ));
    }
    Ok(rounded as u32)
}

pub fn slots_to_ms(slots: u32, slot_ms: f64) -> f64 {
    f64::from(slots) * slot_ms
}
