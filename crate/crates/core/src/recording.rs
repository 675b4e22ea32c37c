//! The in-memory signal model shared by every reader, transform and writer.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physical unit of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "V")]
    Volt,
    #[serde(rename = "mV")]
    Millivolt,
    #[serde(rename = "uV")]
    Microvolt,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Unit {
    /// Multiplier that converts a value in this unit to volts.
    pub fn to_volts(self) -> Option<f64> {
        match self {
            Unit::Volt => Some(1.0),
            Unit::Millivolt => Some(1e-3),
            Unit::Microvolt => Some(1e-6),
            Unit::Unknown => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Volt => "V",
            Unit::Millivolt => "mV",
            Unit::Microvolt => "uV",
            Unit::Unknown => "unknown",
        }
    }

    /// Maps an EDF-style physical dimension label onto a unit.
    pub fn from_dimension(label: &str) -> Unit {
        match label.trim() {
            "V" | "v" => Unit::Volt,
            "mV" | "mv" | "MV" => Unit::Millivolt,
            "uV" | "uv" | "UV" | "µV" | "μV" => Unit::Microvolt,
            _ => Unit::Unknown,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "V" => Ok(Unit::Volt),
            "mV" => Ok(Unit::Millivolt),
            "uV" | "µV" => Ok(Unit::Microvolt),
            "unknown" => Ok(Unit::Unknown),
            other => Err(format!("unrecognised unit {other:?}")),
        }
    }
}

/// A timestamped annotation, in seconds from the start of the recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub onset: f64,
    pub duration: f64,
    pub label: String,
}

impl Event {
    pub fn new(onset: f64, duration: f64, label: impl Into<String>) -> Self {
        Event {
            onset,
            duration,
            label: label.into(),
        }
    }
}

/// Sorts events by onset, then duration, then label.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| {
        a.onset
            .total_cmp(&b.onset)
            .then(a.duration.total_cmp(&b.duration))
            .then_with(|| a.label.cmp(&b.label))
    });
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordingError {
    #[error("sampling rate must be positive and finite, got {0}")]
    BadSamplingRate(f64),
    #[error("recording has no channels")]
    NoChannels,
    #[error("recording has no samples")]
    NoSamples,
    #[error("{what} has {got} entries but the recording has {expected} channels")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Multichannel signal: a channels × samples matrix plus the metadata
/// needed to interpret it.
///
/// Construction goes through [`Recording::new`], which enforces that the
/// sampling rate is positive, that there is at least one channel and one
/// sample, and that the per-channel metadata lists match the channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    data: Array2<f64>,
    sampling_rate: f64,
    channel_names: Vec<String>,
    units: Vec<Unit>,
    events: Vec<Event>,
    source_path: String,
}

impl Recording {
    pub fn new(
        data: Array2<f64>,
        sampling_rate: f64,
        channel_names: Vec<String>,
        units: Vec<Unit>,
        mut events: Vec<Event>,
        source_path: impl Into<String>,
    ) -> Result<Self, RecordingError> {
        if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
            return Err(RecordingError::BadSamplingRate(sampling_rate));
        }
        let (n_channels, n_samples) = data.dim();
        if n_channels == 0 {
            return Err(RecordingError::NoChannels);
        }
        if n_samples == 0 {
            return Err(RecordingError::NoSamples);
        }
        if channel_names.len() != n_channels {
            return Err(RecordingError::LengthMismatch {
                what: "channel_names",
                expected: n_channels,
                got: channel_names.len(),
            });
        }
        if units.len() != n_channels {
            return Err(RecordingError::LengthMismatch {
                what: "units",
                expected: n_channels,
                got: units.len(),
            });
        }
        sort_events(&mut events);
        Ok(Recording {
            data,
            sampling_rate,
            channel_names,
            units,
            events,
            source_path: source_path.into(),
        })
    }

    /// Builds a recording with default names `ch1..chN` and unknown units.
    pub fn from_data(data: Array2<f64>, sampling_rate: f64) -> Result<Self, RecordingError> {
        let n = data.nrows();
        Recording::new(
            data,
            sampling_rate,
            default_channel_names(n),
            vec![Unit::Unknown; n],
            Vec::new(),
            "",
        )
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Duration in seconds (`n_samples / sampling_rate`).
    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate
    }

    /// Returns a copy with the data matrix replaced; the channel count must
    /// be unchanged.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self, RecordingError> {
        Recording::new(
            data,
            self.sampling_rate,
            self.channel_names.clone(),
            self.units.clone(),
            self.events.clone(),
            self.source_path.clone(),
        )
    }

    pub fn with_sampling_rate(self, sampling_rate: f64) -> Result<Self, RecordingError> {
        Recording::new(
            self.data,
            sampling_rate,
            self.channel_names,
            self.units,
            self.events,
            self.source_path,
        )
    }

    pub fn with_channel_names(self, names: Vec<String>) -> Result<Self, RecordingError> {
        Recording::new(
            self.data,
            self.sampling_rate,
            names,
            self.units,
            self.events,
            self.source_path,
        )
    }

    pub fn with_units(self, units: Vec<Unit>) -> Result<Self, RecordingError> {
        Recording::new(
            self.data,
            self.sampling_rate,
            self.channel_names,
            units,
            self.events,
            self.source_path,
        )
    }

    pub fn with_events(mut self, mut events: Vec<Event>) -> Self {
        sort_events(&mut events);
        self.events = events;
        self
    }

    pub fn with_source_path(mut self, path: impl Into<String>) -> Self {
        self.source_path = path.into();
        self
    }

    pub fn into_parts(self) -> (Array2<f64>, f64, Vec<String>, Vec<Unit>, Vec<Event>, String) {
        (
            self.data,
            self.sampling_rate,
            self.channel_names,
            self.units,
            self.events,
            self.source_path,
        )
    }
}

pub fn default_channel_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("ch{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_invalid_shapes() {
        let empty = Array2::<f64>::zeros((0, 4));
        assert_eq!(
            Recording::from_data(empty, 100.0),
            Err(RecordingError::NoChannels)
        );
        let no_samples = Array2::<f64>::zeros((2, 0));
        assert_eq!(
            Recording::from_data(no_samples, 100.0),
            Err(RecordingError::NoSamples)
        );
        assert_eq!(
            Recording::from_data(array![[1.0]], 0.0),
            Err(RecordingError::BadSamplingRate(0.0))
        );
        let err = Recording::new(
            array![[1.0, 2.0]],
            10.0,
            vec!["a".into(), "b".into()],
            vec![Unit::Unknown],
            vec![],
            "",
        )
        .unwrap_err();
        assert!(matches!(err, RecordingError::LengthMismatch { .. }));
    }

    #[test]
    fn events_are_kept_sorted() {
        let rec = Recording::from_data(array![[0.0; 10]], 10.0)
            .unwrap()
            .with_events(vec![Event::new(0.5, 0.0, "b"), Event::new(0.1, 0.0, "a")]);
        assert_eq!(rec.events()[0].label, "a");
        assert_eq!(rec.duration(), 1.0);
    }

    #[test]
    fn unit_labels_parse() {
        for u in [Unit::Volt, Unit::Millivolt, Unit::Microvolt, Unit::Unknown] {
            assert_eq!(u.as_str().parse::<Unit>().unwrap(), u);
        }
        assert_eq!(Unit::from_dimension("µV"), Unit::Microvolt);
        assert_eq!(Unit::from_dimension("degC"), Unit::Unknown);
    }
}
