//! Delimiter-separated numeric signal files (`.csv`, `.tsv`, `.txt`).
//!
//! Layout: one row per sample, one column per channel, optional header row.
//! A `time`/`timestamp` column supplies the sampling rate and is dropped; an
//! `event`/`marker`/`trigger` column becomes events and is dropped.

use std::path::Path;

use ndarray::Array2;

use super::{normalize_channel_name, FormatError, Inferred, Parsed, ReadHints};
use crate::recording::{default_channel_names, Event, Recording, Unit};

const TIME_COLUMNS: [&str; 2] = ["time", "timestamp"];
const EVENT_COLUMNS: [&str; 3] = ["event", "marker", "trigger"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Delimiter {
    Byte(u8),
    Whitespace,
}

/// Picks the delimiter occurring most often in the first line; falls back
/// to whitespace when none of comma, tab or semicolon appears.
fn sniff_delimiter(first_line: &str) -> Delimiter {
    let counts = b",\t;".map(|d| (first_line.bytes().filter(|&b| b == d).count(), d));
    match counts.iter().max_by_key(|(n, _)| *n) {
        Some(&(n, d)) if n > 0 => Delimiter::Byte(d),
        _ => Delimiter::Whitespace,
    }
}

fn split_line(line: &str, delim: Delimiter) -> Vec<&str> {
    match delim {
        Delimiter::Byte(d) => line.split(d as char).map(str::trim).collect(),
        Delimiter::Whitespace => line.split_whitespace().collect(),
    }
}

pub fn read_csv_signal(path: impl AsRef<Path>, hints: &ReadHints) -> Result<Parsed, FormatError> {
    let path = path.as_ref();
    let bytes = super::read_file(path)?;
    let text = String::from_utf8_lossy(&bytes);
    parse_csv_signal(&text, hints, &path.display().to_string())
}

/// Parses signal text. See the module docs for the column conventions.
pub fn parse_csv_signal(
    text: &str,
    hints: &ReadHints,
    source: &str,
) -> Result<Parsed, FormatError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let Some((first_no, first)) = lines.next() else {
        return Err(FormatError::NoNumericColumns);
    };
    let delim = sniff_delimiter(first);
    let first_fields = split_line(first, delim);
    let width = first_fields.len();
    let has_header = first_fields.iter().any(|f| f.parse::<f64>().is_err());

    let header: Vec<String> = if has_header {
        first_fields
            .iter()
            .map(|s| s.trim_matches('"').to_string())
            .collect()
    } else {
        Vec::new()
    };
    let role = |i: usize| -> Role {
        let Some(name) = header.get(i) else {
            return Role::Data;
        };
        let lower = name.to_ascii_lowercase();
        if TIME_COLUMNS.contains(&lower.as_str()) {
            Role::Time
        } else if EVENT_COLUMNS.contains(&lower.as_str()) {
            Role::Event
        } else {
            Role::Data
        }
    };
    let roles: Vec<Role> = (0..width).map(role).collect();
    let data_cols: Vec<usize> = (0..width).filter(|&i| roles[i] == Role::Data).collect();
    if data_cols.is_empty() {
        return Err(FormatError::NoNumericColumns);
    }
    let time_col = roles.iter().position(|r| *r == Role::Time);
    let event_col = roles.iter().position(|r| *r == Role::Event);

    let body: Vec<(usize, &str)> = if has_header {
        lines.collect()
    } else {
        std::iter::once((first_no, first)).chain(lines).collect()
    };
    let n = body.len();
    if n == 0 {
        return Err(FormatError::NoNumericColumns);
    }

    let mut data = Array2::<f64>::zeros((data_cols.len(), n));
    let mut times = Vec::new();
    let mut markers = Vec::new();
    for (k, (line_no, line)) in body.iter().enumerate() {
        let fields = split_line(line, delim);
        if fields.len() != width {
            return Err(FormatError::InconsistentColumnCount {
                line: line_no + 1,
                expected: width,
                found: fields.len(),
            });
        }
        for (row, &col) in data_cols.iter().enumerate() {
            data[[row, k]] =
                fields[col]
                    .parse::<f64>()
                    .map_err(|_| FormatError::NonNumericCell {
                        line: line_no + 1,
                        column: col + 1,
                    })?;
        }
        if let Some(c) = time_col {
            times.push(
                fields[c]
                    .parse::<f64>()
                    .map_err(|_| FormatError::NonNumericCell {
                        line: line_no + 1,
                        column: c + 1,
                    })?,
            );
        }
        if let Some(c) = event_col {
            markers.push(fields[c].trim_matches('"').to_string());
        }
    }

    let mut inferred = Inferred::default();
    let sampling_rate = match time_col {
        Some(_) => rate_from_timestamps(&times)?,
        None => {
            inferred.sampling_rate = true;
            hints
                .sampling_rate
                .ok_or(FormatError::MissingSamplingRate)?
        }
    };
    let names = if has_header {
        data_cols
            .iter()
            .map(|&c| normalize_channel_name(&header[c]))
            .collect()
    } else if let Some(names) = hints
        .channel_names
        .as_ref()
        .filter(|names| names.len() == data_cols.len())
    {
        inferred.channel_names = true;
        names.clone()
    } else {
        inferred.channel_names = true;
        default_channel_names(data_cols.len())
    };
    let events = marker_events(&markers, sampling_rate);
    let units = vec![Unit::Unknown; data_cols.len()];
    let recording = Recording::new(data, sampling_rate, names, units, events, source)?;
    Ok(Parsed {
        recording,
        inferred,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Data,
    Time,
    Event,
}

/// Sampling rate from a time column. On a regular grid (every step within
/// half of the median step) the rate is the step count over the total span,
/// which averages out rounding in printed timestamps; otherwise it is the
/// reciprocal of the median step. Within 1e-4 (relative) of a whole number
/// of hertz, the whole number is taken.
fn rate_from_timestamps(times: &[f64]) -> Result<f64, FormatError> {
    let mut diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.is_empty() {
        return Err(FormatError::MissingSamplingRate);
    }
    diffs.sort_by(f64::total_cmp);
    let mid = diffs.len() / 2;
    let median = if diffs.len() % 2 == 1 {
        diffs[mid]
    } else {
        0.5 * (diffs[mid - 1] + diffs[mid])
    };
    if !(median > 0.0 && median.is_finite()) {
        return Err(FormatError::MissingSamplingRate);
    }
    let regular = (diffs[0] - median).abs() <= 0.5 * median
        && (diffs[diffs.len() - 1] - median).abs() <= 0.5 * median;
    let rate = if regular {
        diffs.len() as f64 / (times[times.len() - 1] - times[0])
    } else {
        1.0 / median
    };
    let whole = rate.round();
    Ok(if whole > 0.0 && (rate - whole).abs() <= 1e-4 * rate {
        whole
    } else {
        rate
    })
}

fn is_marker_active(value: &str) -> bool {
    let v = value.trim();
    !(v.is_empty() || v.parse::<f64>().is_ok_and(|x| x == 0.0))
}

/// Turns a per-sample marker column into events: a change into a nonzero
/// (non-empty) value opens an event, a change away from it closes it.
pub fn marker_events(markers: &[String], sampling_rate: f64) -> Vec<Event> {
    let mut events = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (k, m) in markers.iter().enumerate() {
        let m = m.trim();
        let active = is_marker_active(m);
        match open {
            Some((start, label)) if !active || label != m => {
                events.push(Event::new(
                    start as f64 / sampling_rate,
                    (k - start) as f64 / sampling_rate,
                    canonical_marker(label),
                ));
                open = active.then_some((k, m));
            }
            None if active => open = Some((k, m)),
            _ => {}
        }
    }
    if let Some((start, label)) = open {
        events.push(Event::new(
            start as f64 / sampling_rate,
            (markers.len() - start) as f64 / sampling_rate,
            canonical_marker(label),
        ));
    }
    events
}

/// `3.0` and `3` name the same trigger code.
fn canonical_marker(label: &str) -> String {
    match label.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
        _ => label.to_string(),
    }
}
