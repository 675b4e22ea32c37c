//! Format detection, readers and writers, and dataset scanning.

mod channels;
pub mod csv_signal;
pub mod edf;
pub mod mat;
pub mod rawsidecar;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::cleaning::classify_completeness;
use crate::locator::{effective_metadata, LocatorRow, LocatorTable, SourceMetadata};
use crate::recording::{Recording, RecordingError, Unit};

pub use channels::normalize_channel_name;
pub use csv_signal::read_csv_signal;
pub use edf::{read_edf, write_edf};
pub use mat::read_mat_v5;
pub use rawsidecar::{read_rawsidecar, write_rawsidecar};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset root {0} does not exist")]
    RootNotFound(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("data channels have different sampling rates")]
    MixedSamplingRates,
    #[error("header declares {expected} data records but the file holds {found}")]
    TruncatedRecord { expected: usize, found: usize },
    #[error("no numeric signal columns")]
    NoNumericColumns,
    #[error("line {line} has {found} columns, expected {expected}")]
    InconsistentColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric value at line {line}, column {column}")]
    NonNumericCell { line: usize, column: usize },
    #[error("sampling rate is neither stored in the file nor supplied")]
    MissingSamplingRate,
    #[error("unsupported MAT-file version {0}")]
    UnsupportedMatVersion(String),
    #[error("MAT-file holds no 2-D numeric array")]
    NoNumericArray,
    #[error("malformed MAT-file: {0}")]
    MalformedMat(String),
    #[error(
        "sidecar describes {expected_bytes} bytes of samples but the data file has {found_bytes}"
    )]
    SidecarMismatch {
        expected_bytes: usize,
        found_bytes: usize,
    },
    #[error("recording contains non-finite samples")]
    NonFinite,
    #[error("sampling rate {0} Hz cannot be stored with whole-second EDF records")]
    UnrepresentableSamplingRate(f64),
    #[error("no reader for file type {0}")]
    UnsupportedFormat(FormatKind),
    #[error("locator lists {expected} {what} but the file has {found} channels")]
    ChannelCountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

/// File formats the readers know about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatKind {
    Edf,
    Bdf,
    Csv,
    Txt,
    Mat,
    #[serde(rename = "rawsidecar")]
    RawSidecar,
    Unknown,
}

impl FormatKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FormatKind::Edf => "edf",
            FormatKind::Bdf => "bdf",
            FormatKind::Csv => "csv",
            FormatKind::Txt => "txt",
            FormatKind::Mat => "mat",
            FormatKind::RawSidecar => "rawsidecar",
            FormatKind::Unknown => "unknown",
        }
    }
}

impl fmt::Display for FormatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edf" => Ok(FormatKind::Edf),
            "bdf" => Ok(FormatKind::Bdf),
            "csv" => Ok(FormatKind::Csv),
            "txt" => Ok(FormatKind::Txt),
            "mat" => Ok(FormatKind::Mat),
            "rawsidecar" => Ok(FormatKind::RawSidecar),
            "unknown" => Ok(FormatKind::Unknown),
            other => Err(format!("unknown file type {other:?}")),
        }
    }
}

/// Values a reader may fall back on when the file does not carry them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReadHints {
    pub sampling_rate: Option<f64>,
    pub channel_names: Option<Vec<String>>,
}

/// Which basic attributes a reader had to infer rather than read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Inferred {
    pub sampling_rate: bool,
    pub channel_names: bool,
}

impl Inferred {
    pub fn any(self) -> bool {
        self.sampling_rate || self.channel_names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub recording: Recording,
    pub inferred: Inferred,
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Unreadable {
        path: path.display().to_string(),
        source,
    })
}

/// Classifies a file from its leading bytes, its extension and the presence
/// of a raw-container sidecar.
pub fn detect_format(path: impl AsRef<Path>) -> Result<FormatKind, FormatError> {
    use std::io::Read;

    let path = path.as_ref();
    let mut head = Vec::with_capacity(256);
    std::fs::File::open(path)
        .and_then(|f| f.take(256).read_to_end(&mut head))
        .map_err(|source| FormatError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
    Ok(classify(path, &head))
}

fn classify(path: &Path, head: &[u8]) -> FormatKind {
    if head.len() >= 8 && head[0] == 0xFF && &head[1..8] == b"BIOSEMI" && plausible_edf(head) {
        return FormatKind::Bdf;
    }
    if head.len() >= 8 && &head[..8] == b"0       " && plausible_edf(head) {
        return FormatKind::Edf;
    }
    if head.starts_with(b"MATLAB ")
        && head.len() >= 116
        && head[..116].windows(8).any(|w| w == b"MAT-file")
    {
        return FormatKind::Mat;
    }
    if rawsidecar::probe_sidecar(path).is_some() {
        return FormatKind::RawSidecar;
    }
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "csv" | "tsv" => FormatKind::Csv,
        "txt" => FormatKind::Txt,
        _ => FormatKind::Unknown,
    }
}

/// The version field alone is easy to hit by accident; also require a full
/// fixed header whose size field is a multiple of 256.
fn plausible_edf(head: &[u8]) -> bool {
    head.len() >= 256
        && std::str::from_utf8(&head[184..192])
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .is_some_and(|n| n >= 512 && n % 256 == 0)
}

/// Reads `path` as `kind`.
pub fn read_recording(
    path: impl AsRef<Path>,
    kind: FormatKind,
    hints: &ReadHints,
) -> Result<Parsed, FormatError> {
    let path = path.as_ref();
    let plain = |recording: Recording| Parsed {
        recording,
        inferred: Inferred::default(),
    };
    match kind {
        FormatKind::Edf | FormatKind::Bdf => read_edf(path).map(plain),
        FormatKind::Csv | FormatKind::Txt => read_csv_signal(path, hints),
        FormatKind::Mat => read_mat_v5(path, hints),
        FormatKind::RawSidecar => read_rawsidecar(path).map(plain),
        FormatKind::Unknown => Err(FormatError::UnsupportedFormat(kind)),
    }
}

/// Metadata a recording carries on its own.
pub fn source_metadata(rec: &Recording, kind: FormatKind) -> SourceMetadata {
    SourceMetadata {
        file_type: Some(kind),
        channel_names: Some(rec.channel_names().to_vec()),
        sampling_rate: Some(rec.sampling_rate()),
        duration: Some(rec.duration()),
        units: rec
            .units()
            .iter()
            .any(|u| *u != Unit::Unknown)
            .then(|| rec.units().to_vec()),
        events: (!rec.events().is_empty()).then(|| rec.events().to_vec()),
    }
}

/// Loads the file a locator row points at, with the row's metadata taking
/// precedence over the file's own header.
pub fn load_recording(row: &LocatorRow) -> Result<Recording, FormatError> {
    let path = Path::new(&row.file_path);
    let kind = match row.file_type {
        FormatKind::Unknown => detect_format(path)?,
        k => k,
    };
    let hints = ReadHints {
        sampling_rate: row.sampling_rate,
        channel_names: (!row.channel_names.is_empty()).then(|| row.channel_names.clone()),
    };
    let parsed = read_recording(path, kind, &hints)?;
    let rec = parsed.recording;
    let resolved = effective_metadata(row, Some(&source_metadata(&rec, kind)));

    let n = rec.n_channels();
    let names = resolved.channel_names.unwrap_or_default();
    if names.len() != n {
        return Err(FormatError::ChannelCountMismatch {
            what: "channel names",
            expected: names.len(),
            found: n,
        });
    }
    let units = match resolved.units {
        Some(u) if u.len() == n => u,
        Some(u) => {
            return Err(FormatError::ChannelCountMismatch {
                what: "units",
                expected: u.len(),
                found: n,
            })
        }
        None => rec.units().to_vec(),
    };
    let sampling_rate = resolved.sampling_rate.unwrap_or(rec.sampling_rate());
    let events = resolved.events.unwrap_or_default();
    Ok(rec
        .with_sampling_rate(sampling_rate)?
        .with_channel_names(names)?
        .with_units(units)?
        .with_events(events))
}

/// Builds a locator row for one file.
pub fn describe_file(path: &Path, domain_tag: &str, hints: &ReadHints) -> LocatorRow {
    let file_path = path.to_string_lossy().into_owned();
    let mut row = LocatorRow::unavailable(file_path, domain_tag);
    let kind = match detect_format(path) {
        Ok(k) => k,
        Err(e) => {
            log::warn!("{}: {e}", path.display());
            return row;
        }
    };
    let outcome = read_recording(path, kind, hints);
    row.completeness = classify_completeness(None, &outcome);
    match outcome {
        Ok(parsed) => {
            let rec = &parsed.recording;
            row.file_type = kind;
            row.channel_names = rec.channel_names().to_vec();
            row.sampling_rate = Some(rec.sampling_rate());
            row.duration = Some(rec.duration());
        }
        Err(e) => {
            log::info!("{}: {e}", path.display());
            if kind != FormatKind::Unknown {
                row.file_type = kind;
            }
        }
    }
    row
}

/// Walks `root` and describes every regular file in it.
///
/// Sidecar `.json` files that belong to a raw container are folded into the
/// container's row rather than listed separately.
pub fn scan_dataset(
    root: impl AsRef<Path>,
    domain_tag: &str,
    hints: &ReadHints,
) -> Result<LocatorTable, FormatError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(FormatError::RootNotFound(root.display().to_string()));
    }
    let root = std::path::absolute(root).unwrap_or_else(|_| root.to_path_buf());
    let files: Vec<PathBuf> = WalkDir::new(&root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();

    let containers: HashSet<PathBuf> = files
        .iter()
        .filter(|p| p.extension().is_none_or(|e| e != "json"))
        .filter(|p| rawsidecar::probe_sidecar(p).is_some())
        .map(|p| rawsidecar::sidecar_path(p))
        .collect();

    let rows: Vec<LocatorRow> = files
        .par_iter()
        .filter(|p| !containers.contains(*p))
        .map(|p| describe_file(p, domain_tag, hints))
        .collect();
    Ok(
        LocatorTable::with_provenance(rows, vec![root.display().to_string()])
            .expect("walkdir yields each path once"),
    )
}
