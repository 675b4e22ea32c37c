//! Turning heterogeneous recordings into a uniform shape: resampling,
//! channel alignment, normalisation, units, events and epoching.

mod align;
mod epochs;
mod norm;
mod resample;
mod units;

use thiserror::Error;

use crate::formats::FormatError;
use crate::locator::LocatorRow;
use crate::recording::{sort_events, Event, Recording, RecordingError, Unit};

pub use align::{align_channels, interpolation_weights};
pub use epochs::{
    epoch_by_event, epoch_for_pretraining, pretraining_count, read_epochs, write_epochs, EpochSet,
};
pub use norm::{apply_normalization, compute_norm_factors, NormFactors, Normalized};
pub use resample::{rational_ratio, resample};
pub use units::{convert_units, infer_units, infer_units_with, percentile, UnitThresholds};

#[derive(Debug, Error)]
pub enum UnificationError {
    #[error("no ratio L/M with M <= 1000 matches {0} within 1e-9")]
    RatioOverflow(f64),
    #[error("sampling rate must be positive, got {0}")]
    BadSamplingRate(f64),
    #[error("channel {0:?} is neither in the recording nor in the montage")]
    UnknownChannel(String),
    #[error("no channel of the recording has montage coordinates")]
    NoDonorChannels,
    #[error("donor channels for {channel:?} have mixed units ({units})")]
    MixedDonorUnits { channel: String, units: String },
    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("channel {0:?} has unknown units")]
    UnknownUnit(String),
    #[error("segment length must be positive, got {0}")]
    BadSegment(f64),
    #[error(transparent)]
    Recording(#[from] RecordingError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Events for a recording. A locator row that lists events wins over the
/// file's own annotations and trigger columns.
pub fn get_events(rec: &Recording, row: Option<&LocatorRow>) -> Vec<Event> {
    let mut events = match row.and_then(|r| r.events.as_ref()) {
        Some(listed) => listed.clone(),
        None => rec.events().to_vec(),
    };
    sort_events(&mut events);
    events
}

pub(crate) fn unit_list(units: &[Unit]) -> String {
    units
        .iter()
        .map(|u| u.as_str())
        .collect::<Vec<_>>()
        .join(",")
}
