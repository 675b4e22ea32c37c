use serde::{Deserialize, Serialize};

use super::UnificationError;
use crate::recording::{Recording, Unit};

/// Robust peak-to-peak limits separating V, mV and uV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitThresholds {
    /// Below this range the channel is taken to be in volts.
    pub volt_below: f64,
    /// Below this range (and at least `volt_below`) it is millivolts.
    pub millivolt_below: f64,
}

impl Default for UnitThresholds {
    fn default() -> Self {
        UnitThresholds {
            volt_below: 0.01,
            millivolt_below: 10.0,
        }
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn infer_units(rec: &Recording) -> Vec<Unit> {
    infer_units_with(rec, UnitThresholds::default())
}

/// Guesses each channel's unit from its 2nd-98th percentile range.
pub fn infer_units_with(rec: &Recording, t: UnitThresholds) -> Vec<Unit> {
    rec.data()
        .rows()
        .into_iter()
        .map(|row| {
            if row.len() < 2 {
                return Unit::Unknown;
            }
            let mut sorted = row.to_vec();
            sorted.sort_by(f64::total_cmp);
            let range = percentile(&sorted, 98.0) - percentile(&sorted, 2.0);
            if range == 0.0 || !range.is_finite() {
                Unit::Unknown
            } else if range < t.volt_below {
                Unit::Volt
            } else if range < t.millivolt_below {
                Unit::Millivolt
            } else {
                Unit::Microvolt
            }
        })
        .collect()
}

/// Rescales every channel to `target`.
pub fn convert_units(rec: &Recording, target: Unit) -> Result<Recording, UnificationError> {
    let to = target
        .to_volts()
        .ok_or_else(|| UnificationError::UnknownUnit(target.to_string()))?;
    let mut data = rec.data().clone();
    for ((mut row, unit), name) in data
        .rows_mut()
        .into_iter()
        .zip(rec.units())
        .zip(rec.channel_names())
    {
        let from = unit
            .to_volts()
            .ok_or_else(|| UnificationError::UnknownUnit(name.clone()))?;
        if from != to {
            let factor = from / to;
            row.mapv_inplace(|v| v * factor);
        }
    }
    Ok(rec
        .with_data(data)?
        .with_units(vec![target; rec.n_channels()])?)
}
