//! Lossless unified container: a headerless little-endian `f32` data file
//! (channel-major) plus a same-stem `.json` sidecar describing it.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::recording::{Event, Recording, Unit};

pub const MAGIC: &str = "eegunify-raw-v1";
pub const DATA_EXTENSION: &str = "raw";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub magic: String,
    pub sampling_rate: f64,
    pub channel_names: Vec<String>,
    pub units: Vec<Unit>,
    pub events: Vec<Event>,
    pub n_samples: usize,
    /// Set for epoch batches: epochs are concatenated along the sample axis,
    /// `samples_per_epoch` each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_onsets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl Sidecar {
    pub fn for_recording(rec: &Recording) -> Sidecar {
        Sidecar {
            magic: MAGIC.to_string(),
            sampling_rate: rec.sampling_rate(),
            channel_names: rec.channel_names().to_vec(),
            units: rec.units().to_vec(),
            events: rec.events().to_vec(),
            n_samples: rec.n_samples(),
            samples_per_epoch: None,
            epoch_labels: None,
            epoch_onsets: None,
            provenance: (!rec.source_path().is_empty()).then(|| rec.source_path().to_string()),
        }
    }
}

/// Path of the sidecar that belongs to a data file.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

/// Reads a sidecar if it exists and carries the magic key.
pub fn probe_sidecar(data_path: &Path) -> Option<Sidecar> {
    let text = std::fs::read_to_string(sidecar_path(data_path)).ok()?;
    let sidecar: Sidecar = serde_json::from_str(&text).ok()?;
    (sidecar.magic == MAGIC).then_some(sidecar)
}

pub fn encode_samples(data: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 4);
    for row in data.rows() {
        for &v in row {
            out.extend((v as f32).to_le_bytes());
        }
    }
    out
}

/// Writes the data file and its sidecar.
pub fn write_rawsidecar(rec: &Recording, path: impl AsRef<Path>) -> Result<(), FormatError> {
    write_with_sidecar(rec.data(), &Sidecar::for_recording(rec), path.as_ref())
}

pub(crate) fn write_with_sidecar(
    data: &Array2<f64>,
    sidecar: &Sidecar,
    path: &Path,
) -> Result<(), FormatError> {
    let unwritable = |p: &Path, source| FormatError::Unwritable {
        path: p.display().to_string(),
        source,
    };
    std::fs::write(path, encode_samples(data)).map_err(|e| unwritable(path, e))?;
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serialises");
    let side = sidecar_path(path);
    std::fs::write(&side, json + "\n").map_err(|e| unwritable(&side, e))
}

pub fn read_rawsidecar(path: impl AsRef<Path>) -> Result<Recording, FormatError> {
    let (data, sidecar) = read_with_sidecar(path.as_ref())?;
    let source = sidecar
        .provenance
        .clone()
        .unwrap_or_else(|| path.as_ref().display().to_string());
    Ok(Recording::new(
        data,
        sidecar.sampling_rate,
        sidecar.channel_names,
        sidecar.units,
        sidecar.events,
        source,
    )?)
}

pub(crate) fn read_with_sidecar(path: &Path) -> Result<(Array2<f64>, Sidecar), FormatError> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|source| FormatError::Unreadable {
        path: side.display().to_string(),
        source,
    })?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| FormatError::MalformedHeader(format!("sidecar: {e}")))?;
    if sidecar.magic != MAGIC {
        return Err(FormatError::MalformedHeader(format!(
            "sidecar magic {:?}",
            sidecar.magic
        )));
    }
    let bytes = super::read_file(path)?;
    let channels = sidecar.channel_names.len();
    if sidecar.n_samples * channels * 4 != bytes.len() || channels == 0 {
        return Err(FormatError::SidecarMismatch {
            expected_bytes: sidecar.n_samples * channels * 4,
            found_bytes: bytes.len(),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    let data = Array2::from_shape_vec((channels, sidecar.n_samples), values)
        .expect("length checked above");
    Ok((data, sidecar))
}
