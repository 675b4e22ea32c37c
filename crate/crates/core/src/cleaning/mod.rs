//! Completeness classification, quality scoring, band-pass filtering and
//! FastICA denoising.

mod filter;
mod ica;
mod quality;

use thiserror::Error;

use crate::formats::{FormatError, Parsed};
use crate::locator::{Completeness, LocatorRow};
use crate::metrics::MetricsError;
use crate::recording::RecordingError;

pub use filter::{
    bandpass_filter, design_butterworth, pad_length, sosfiltfilt, FilterKind, Section,
};
pub use ica::{fastica, ica_denoise, Denoised, FastIcaOptions, IcaDecomposition};
pub use quality::{quality_score, ChannelQuality, QualityReport};

#[derive(Debug, Error)]
pub enum CleaningError {
    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid filter band: {0}")]
    InvalidBand(String),
    #[error("ICA needs at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("data covariance has no usable components")]
    RankDeficient,
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

impl From<MetricsError> for CleaningError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::TooShort { needed, got } => CleaningError::TooShort { needed, got },
            other => unreachable!("spectral estimate failed unexpectedly: {other}"),
        }
    }
}

/// Completed when the file parsed and nothing was guessed, Acceptable when
/// the file parsed but a basic attribute came from a fallback, Unavailable
/// when it did not parse.
///
/// An attribute the locator row itself supplies counts as resolved.
pub fn classify_completeness(
    row: Option<&LocatorRow>,
    outcome: &Result<Parsed, FormatError>,
) -> Completeness {
    let Ok(parsed) = outcome else {
        return Completeness::Unavailable;
    };
    let rec = &parsed.recording;
    if rec.n_samples() == 0
        || rec.n_channels() == 0
        || rec.sampling_rate().is_nan()
        || rec.sampling_rate() <= 0.0
    {
        return Completeness::Unavailable;
    }
    let sr_guessed = parsed.inferred.sampling_rate && row.is_none_or(|r| r.sampling_rate.is_none());
    let names_guessed =
        parsed.inferred.channel_names && row.is_none_or(|r| r.channel_names.is_empty());
    if sr_guessed || names_guessed {
        Completeness::Acceptable
    } else {
        Completeness::Completed
    }
}
