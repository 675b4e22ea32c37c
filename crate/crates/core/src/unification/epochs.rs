use std::path::Path;

use ndarray::{s, Array2, Array3};

use super::UnificationError;
use crate::formats::rawsidecar::{self, Sidecar, MAGIC};
use crate::formats::FormatError;
use crate::recording::{Event, Recording, Unit};

/// Fixed-length segments cut from one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    /// epochs x channels x samples.
    pub data: Array3<f64>,
    /// Event label per epoch; empty for pretraining epochs.
    pub labels: Vec<String>,
    /// Epoch start times in seconds.
    pub onsets: Vec<f64>,
    pub seg_sec: f64,
    pub stride_sec: Option<f64>,
    pub sampling_rate: f64,
    pub channel_names: Vec<String>,
    pub units: Vec<Unit>,
    /// Events whose window ran past the end of the recording.
    pub dropped: usize,
}

impl EpochSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn samples_per_epoch(&self) -> usize {
        self.data.shape()[2]
    }
}

fn samples_per_epoch(rec: &Recording, seg_sec: f64) -> Result<usize, UnificationError> {
    if !(seg_sec > 0.0 && seg_sec.is_finite()) {
        return Err(UnificationError::BadSegment(seg_sec));
    }
    Ok(((seg_sec * rec.sampling_rate()).round() as usize).max(1))
}

fn cut(rec: &Recording, starts: &[usize], spe: usize) -> Array3<f64> {
    let mut data = Array3::zeros((starts.len(), rec.n_channels(), spe));
    for (e, &start) in starts.iter().enumerate() {
        data.slice_mut(s![e, .., ..])
            .assign(&rec.data().slice(s![.., start..start + spe]));
    }
    data
}

/// One epoch per event, `[onset, onset + seg_sec)`. Events whose window
/// does not fit inside the recording are dropped and counted.
pub fn epoch_by_event(
    rec: &Recording,
    events: &[Event],
    seg_sec: f64,
) -> Result<EpochSet, UnificationError> {
    let spe = samples_per_epoch(rec, seg_sec)?;
    let fs = rec.sampling_rate();
    let mut starts = Vec::new();
    let mut labels = Vec::new();
    let mut onsets = Vec::new();
    let mut dropped = 0;
    for ev in events {
        let start = (ev.onset * fs).round();
        if start < 0.0 || start as usize + spe > rec.n_samples() {
            dropped += 1;
            continue;
        }
        starts.push(start as usize);
        labels.push(ev.label.clone());
        onsets.push(ev.onset);
    }
    Ok(EpochSet {
        data: cut(rec, &starts, spe),
        labels,
        onsets,
        seg_sec,
        stride_sec: None,
        sampling_rate: fs,
        channel_names: rec.channel_names().to_vec(),
        units: rec.units().to_vec(),
        dropped,
    })
}

/// `floor((duration - seg) / stride) + 1`, or 0 when the recording is
/// shorter than one segment.
pub fn pretraining_count(duration: f64, seg_sec: f64, stride_sec: f64) -> usize {
    if duration + 1e-9 < seg_sec {
        0
    } else {
        ((duration - seg_sec) / stride_sec + 1e-9).floor() as usize + 1
    }
}

/// Consecutive unlabelled epochs at onsets 0, stride, 2 stride, ...
pub fn epoch_for_pretraining(
    rec: &Recording,
    seg_sec: f64,
    stride_sec: Option<f64>,
) -> Result<EpochSet, UnificationError> {
    let spe = samples_per_epoch(rec, seg_sec)?;
    let stride = stride_sec.unwrap_or(seg_sec);
    if !(stride > 0.0 && stride.is_finite()) {
        return Err(UnificationError::BadSegment(stride));
    }
    let fs = rec.sampling_rate();
    let count = pretraining_count(rec.duration(), seg_sec, stride);
    let (starts, onsets): (Vec<usize>, Vec<f64>) = (0..count)
        .map(|k| ((k as f64 * stride * fs).round() as usize, k as f64 * stride))
        .filter(|(start, _)| start + spe <= rec.n_samples())
        .unzip();
    Ok(EpochSet {
        data: cut(rec, &starts, spe),
        labels: vec![String::new(); starts.len()],
        onsets,
        seg_sec,
        stride_sec: Some(stride),
        sampling_rate: fs,
        channel_names: rec.channel_names().to_vec(),
        units: rec.units().to_vec(),
        dropped: 0,
    })
}

/// Writes epochs concatenated along time into one raw container whose
/// sidecar records the epoch length, labels and onsets.
pub fn write_epochs(set: &EpochSet, path: &Path, provenance: &str) -> Result<(), UnificationError> {
    let (count, channels, spe) = set.data.dim();
    let mut flat = Array2::zeros((channels, count * spe));
    for e in 0..count {
        flat.slice_mut(s![.., e * spe..(e + 1) * spe])
            .assign(&set.data.slice(s![e, .., ..]));
    }
    let sidecar = Sidecar {
        magic: MAGIC.to_string(),
        sampling_rate: set.sampling_rate,
        channel_names: set.channel_names.clone(),
        units: set.units.clone(),
        events: Vec::new(),
        n_samples: count * spe,
        samples_per_epoch: Some(spe),
        epoch_labels: Some(set.labels.clone()),
        epoch_onsets: Some(set.onsets.clone()),
        provenance: (!provenance.is_empty()).then(|| provenance.to_string()),
    };
    rawsidecar::write_with_sidecar(&flat, &sidecar, path)?;
    Ok(())
}

pub fn read_epochs(path: &Path) -> Result<EpochSet, UnificationError> {
    let (flat, sidecar) = rawsidecar::read_with_sidecar(path)?;
    let malformed = |what: &str| FormatError::MalformedHeader(format!("epoch sidecar: {what}"));
    let spe = sidecar
        .samples_per_epoch
        .ok_or_else(|| malformed("no samples_per_epoch"))?;
    let labels = sidecar.epoch_labels.unwrap_or_default();
    let onsets = sidecar.epoch_onsets.unwrap_or_default();
    let count = labels.len();
    if spe == 0 || count * spe != sidecar.n_samples || onsets.len() != count {
        return Err(malformed("epoch counts disagree").into());
    }
    let channels = sidecar.channel_names.len();
    let mut data = Array3::zeros((count, channels, spe));
    for e in 0..count {
        data.slice_mut(s![e, .., ..])
            .assign(&flat.slice(s![.., e * spe..(e + 1) * spe]));
    }
    Ok(EpochSet {
        data,
        labels,
        onsets,
        seg_sec: spe as f64 / sidecar.sampling_rate,
        stride_sec: None,
        sampling_rate: sidecar.sampling_rate,
        channel_names: sidecar.channel_names,
        units: sidecar.units,
        dropped: 0,
    })
}
