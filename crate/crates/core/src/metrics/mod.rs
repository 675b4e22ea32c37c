//! Dataset diagnostics: categorical report, band magnitude curves and
//! channel-correlation matrices, with CSV and SVG emission.

mod correlation;
mod curves;
mod report;
mod spectral;
pub mod svg;

use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formats::FormatError;
use crate::locator::{Completeness, LocatorRow, LocatorTable};

pub use correlation::{
    channel_correlation, correlation_grid, grid_shape, Correlation, CorrelationGrid,
};
pub use curves::{band_curves, Band, BandCurve, BandCurves, CurveOptions};
pub use report::{report, write_quality_breakdown, write_report, DatasetReport, ScoredFile, Tally};
pub use spectral::{band_power, welch, welch_psd, Psd};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("the locator table is empty")]
    EmptyTable,
    #[error("no Completed rows to sample from")]
    NoCompletedRows,
    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("channel index {index} out of range for {channels} channels")]
    NoSuchChannel { index: usize, channels: usize },
    #[error("{path}: {source}")]
    Load {
        path: String,
        #[source]
        source: FormatError,
    },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), MetricsError> {
    std::fs::write(path, text).map_err(|source| MetricsError::Unwritable {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<PathBuf, MetricsError> {
    std::fs::create_dir_all(dir).map_err(|source| MetricsError::Unwritable {
        path: dir.display().to_string(),
        source,
    })?;
    Ok(dir.to_path_buf())
}

/// Draws `min(max_sample, available)` Completed rows uniformly without
/// replacement, in draw order.
pub fn sample_completed(
    table: &LocatorTable,
    max_sample: usize,
    seed: u64,
) -> Result<Vec<&LocatorRow>, MetricsError> {
    let pool: Vec<&LocatorRow> = table
        .rows()
        .iter()
        .filter(|r| r.completeness == Completeness::Completed)
        .collect();
    if pool.is_empty() {
        return Err(MetricsError::NoCompletedRows);
    }
    let k = max_sample.min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}
