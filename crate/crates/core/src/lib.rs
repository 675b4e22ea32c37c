//! Reading, cataloguing, cleaning and unifying heterogeneous EEG datasets.
//!
//! A dataset is described by a [`LocatorTable`]: one row per data file with
//! its basic attributes (file type, channels, sampling rate, duration) and
//! optional advanced attributes (quality, normalisation, units, events).
//! Values in the table override whatever the files themselves declare.

pub mod batch;
pub mod cleaning;
pub mod formats;
pub mod llm;
pub mod locator;
pub mod metrics;
pub mod montage;
pub mod recording;
pub mod unification;

use thiserror::Error;

pub use batch::{run_batch, BatchOptions, BatchResult, PipelineSpec, Registry, RowOutcome};
pub use formats::{detect_format, load_recording, scan_dataset, FormatKind, ReadHints};
pub use locator::{
    filter_rows, load_locator, merge_locators, save_locator, Completeness, LocatorRow,
    LocatorTable, Predicate,
};
pub use montage::Montage;
pub use recording::{Event, Recording, Unit};
pub use unification::EpochSet;

/// Any error the library can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Recording(#[from] recording::RecordingError),
    #[error(transparent)]
    Locator(#[from] locator::LocatorError),
    #[error(transparent)]
    Format(#[from] formats::FormatError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Cleaning(#[from] cleaning::CleaningError),
    #[error(transparent)]
    Unification(#[from] unification::UnificationError),
    #[error(transparent)]
    Batch(#[from] batch::BatchError),
    #[error(transparent)]
    Llm(#[from] llm::LlmError),
}
