//! EDF, EDF+ and BDF.
//!
//! A file is a 256-byte fixed header, 256 bytes of header per signal, then
//! `n_records` data records. Each record holds `samples_per_record` samples
//! for every signal in turn, as 16-bit (EDF) or 24-bit (BDF) little-endian
//! two's-complement integers. Digital values map linearly onto physical
//! values through each signal's `(digital_min, digital_max)` ->
//! `(physical_min, physical_max)` pair.
//!
//! EDF+ annotations live in a signal labelled `EDF Annotations` whose bytes
//! are a sequence of time-stamped annotation lists (TALs):
//! `+onset[\x15duration]\x14label\x14...\x00`.

use std::path::Path;

use ndarray::Array2;

use super::{normalize_channel_name, FormatError};
use crate::recording::{Event, Recording, Unit};

const ANNOTATION_LABELS: [&str; 2] = ["EDF Annotations", "BDF Annotations"];
const DIGITAL_MIN: i32 = -32767;
const DIGITAL_MAX: i32 = 32767;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdfVariant {
    Edf,
    Bdf,
}

impl EdfVariant {
    fn sample_width(self) -> usize {
        match self {
            EdfVariant::Edf => 2,
            EdfVariant::Bdf => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

impl SignalHeader {
    pub fn is_annotation(&self) -> bool {
        ANNOTATION_LABELS.contains(&self.label.trim())
    }

    fn to_physical(&self, digital: i32) -> f64 {
        let span = f64::from(self.digital_max) - f64::from(self.digital_min);
        (f64::from(digital) - f64::from(self.digital_min)) * (self.physical_max - self.physical_min)
            / span
            + self.physical_min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub variant: EdfVariant,
    pub patient: String,
    pub recording: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    pub reserved: String,
    pub n_records: usize,
    pub record_duration: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    fn record_bytes(&self) -> usize {
        self.signals
            .iter()
            .map(|s| s.samples_per_record)
            .sum::<usize>()
            * self.variant.sample_width()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn field(&mut self, width: usize, name: &str) -> Result<&'a str, FormatError> {
        let end = self.pos + width;
        let raw = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| FormatError::MalformedHeader(format!("header ends inside {name}")))?;
        self.pos = end;
        std::str::from_utf8(raw)
            .map(str::trim)
            .map_err(|_| FormatError::MalformedHeader(format!("{name} is not ASCII")))
    }

    fn number<T: std::str::FromStr>(&mut self, width: usize, name: &str) -> Result<T, FormatError> {
        let text = self.field(width, name)?;
        text.parse()
            .map_err(|_| FormatError::MalformedHeader(format!("{name} {text:?} is not a number")))
    }
}

/// Parses the fixed and per-signal headers.
pub fn parse_header(bytes: &[u8]) -> Result<EdfHeader, FormatError> {
    if bytes.len() < 256 {
        return Err(FormatError::MalformedHeader(
            "file shorter than 256 bytes".into(),
        ));
    }
    let variant = if bytes[0] == 0xFF && &bytes[1..8] == b"BIOSEMI" {
        EdfVariant::Bdf
    } else if &bytes[..8] == b"0       " {
        EdfVariant::Edf
    } else {
        return Err(FormatError::MalformedHeader(
            "unrecognised version field".into(),
        ));
    };
    let mut c = Cursor { bytes, pos: 8 };
    let patient = c.field(80, "patient")?.to_string();
    let recording = c.field(80, "recording")?.to_string();
    let start_date = c.field(8, "start date")?.to_string();
    let start_time = c.field(8, "start time")?.to_string();
    let header_bytes: usize = c.number(8, "header size")?;
    let reserved = c.field(44, "reserved")?.to_string();
    let n_records: i64 = c.number(8, "record count")?;
    let record_duration: f64 = c.number(8, "record duration")?;
    let ns: usize = c.number(4, "signal count")?;

    if header_bytes != 256 * (ns + 1) {
        return Err(FormatError::MalformedHeader(format!(
            "header size {header_bytes} does not match {ns} signals"
        )));
    }
    if bytes.len() < header_bytes {
        return Err(FormatError::MalformedHeader(
            "signal headers truncated".into(),
        ));
    }
    if !(record_duration.is_finite() && record_duration >= 0.0) {
        return Err(FormatError::MalformedHeader(format!(
            "record duration {record_duration}"
        )));
    }

    // Per-signal fields are stored field-major: all labels, then all
    // transducers, and so on.
    let mut column = |width: usize, name: &str| -> Result<Vec<String>, FormatError> {
        (0..ns)
            .map(|_| c.field(width, name).map(str::to_string))
            .collect()
    };
    let labels = column(16, "label")?;
    let transducers = column(80, "transducer")?;
    let dims = column(8, "physical dimension")?;
    let pmins = column(8, "physical minimum")?;
    let pmaxs = column(8, "physical maximum")?;
    let dmins = column(8, "digital minimum")?;
    let dmaxs = column(8, "digital maximum")?;
    let prefilters = column(80, "prefiltering")?;
    let sprs = column(8, "samples per record")?;

    let num = |s: &str, name: &str| -> Result<f64, FormatError> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| FormatError::MalformedHeader(format!("{name} {s:?}")))
    };
    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let signal = SignalHeader {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: num(&pmins[i], "physical minimum")?,
            physical_max: num(&pmaxs[i], "physical maximum")?,
            digital_min: num(&dmins[i], "digital minimum")? as i32,
            digital_max: num(&dmaxs[i], "digital maximum")? as i32,
            prefiltering: prefilters[i].clone(),
            samples_per_record: sprs[i].parse().map_err(|_| {
                FormatError::MalformedHeader(format!("samples per record {:?}", sprs[i]))
            })?,
        };
        if signal.digital_max <= signal.digital_min {
            return Err(FormatError::MalformedHeader(format!(
                "signal {:?} has empty digital range",
                signal.label
            )));
        }
        signals.push(signal);
    }

    let mut header = EdfHeader {
        variant,
        patient,
        recording,
        start_date,
        start_time,
        header_bytes,
        reserved,
        n_records: 0,
        record_duration,
        signals,
    };
    let record_bytes = header.record_bytes();
    let available = bytes.len() - header_bytes;
    header.n_records = if n_records < 0 {
        // -1: unknown while recording; infer from the file size.
        available.checked_div(record_bytes).unwrap_or(0)
    } else {
        let n = n_records as usize;
        if n * record_bytes > available {
            return Err(FormatError::TruncatedRecord {
                expected: n,
                found: available.checked_div(record_bytes).unwrap_or(0),
            });
        }
        n
    };
    Ok(header)
}

pub fn read_edf(path: impl AsRef<Path>) -> Result<Recording, FormatError> {
    let path = path.as_ref();
    let bytes = super::read_file(path)?;
    read_edf_bytes(&bytes, &path.display().to_string()).map(|(_, rec)| rec)
}

/// Decodes a whole EDF/BDF file held in memory.
pub fn read_edf_bytes(bytes: &[u8], source: &str) -> Result<(EdfHeader, Recording), FormatError> {
    let header = parse_header(bytes)?;
    let width = header.variant.sample_width();
    let data_signals: Vec<usize> = (0..header.signals.len())
        .filter(|&i| !header.signals[i].is_annotation())
        .collect();
    let Some(&first) = data_signals.first() else {
        return Err(FormatError::MalformedHeader("no data signals".into()));
    };
    let spr = header.signals[first].samples_per_record;
    if data_signals
        .iter()
        .any(|&i| header.signals[i].samples_per_record != spr)
    {
        return Err(FormatError::MixedSamplingRates);
    }
    if header.record_duration <= 0.0 || spr == 0 {
        return Err(FormatError::MalformedHeader(
            "record duration and samples per record must be positive".into(),
        ));
    }
    let sampling_rate = spr as f64 / header.record_duration;

    let n_samples = spr * header.n_records;
    let mut data = Array2::<f64>::zeros((data_signals.len(), n_samples));
    let mut events = Vec::new();
    let mut pos = header.header_bytes;
    for record in 0..header.n_records {
        let mut row = 0;
        for signal in &header.signals {
            let len = signal.samples_per_record * width;
            let chunk = &bytes[pos..pos + len];
            pos += len;
            if signal.is_annotation() {
                events.extend(parse_tals(chunk));
                continue;
            }
            let offset = record * spr;
            for (k, sample) in chunk.chunks_exact(width).enumerate() {
                data[[row, offset + k]] = signal.to_physical(decode_sample(sample));
            }
            row += 1;
        }
    }

    let names = data_signals
        .iter()
        .map(|&i| normalize_channel_name(&header.signals[i].label))
        .collect();
    let units = data_signals
        .iter()
        .map(|&i| Unit::from_dimension(&header.signals[i].physical_dimension))
        .collect();
    let rec = Recording::new(data, sampling_rate, names, units, events, source)?;
    Ok((header, rec))
}

fn decode_sample(b: &[u8]) -> i32 {
    match b.len() {
        2 => i32::from(i16::from_le_bytes([b[0], b[1]])),
        _ => {
            let raw = i32::from(b[0]) | (i32::from(b[1]) << 8) | (i32::from(b[2]) << 16);
            (raw << 8) >> 8
        }
    }
}

/// Parses the TALs in one record's annotation bytes. Time-keeping TALs
/// (no annotation text) are skipped.
pub fn parse_tals(bytes: &[u8]) -> Vec<Event> {
    let mut events = Vec::new();
    for tal in bytes.split(|&b| b == 0) {
        if tal.is_empty() {
            continue;
        }
        let mut parts = tal.split(|&b| b == 0x14);
        let Some(time) = parts.next() else { continue };
        let time = String::from_utf8_lossy(time);
        let (onset, duration) = match time.split_once('\u{15}') {
            Some((o, d)) => (o.to_string(), d.to_string()),
            None => (time.into_owned(), String::new()),
        };
        let Ok(onset) = onset.trim().parse::<f64>() else {
            continue;
        };
        let duration = duration.trim().parse::<f64>().unwrap_or(0.0);
        for text in parts {
            let label = String::from_utf8_lossy(text).trim().to_string();
            if !label.is_empty() {
                events.push(Event::new(onset.max(0.0), duration.max(0.0), label));
            }
        }
    }
    events
}

fn format_tal(onset: f64, duration: f64, labels: &[&str]) -> Vec<u8> {
    let mut out = format!("{}{}", if onset < 0.0 { "-" } else { "+" }, onset.abs()).into_bytes();
    if duration > 0.0 {
        out.push(0x15);
        out.extend(duration.to_string().bytes());
    }
    out.push(0x14);
    for label in labels {
        out.extend(label.bytes().filter(|&b| b != 0 && b != 0x14 && b != 0x15));
        out.push(0x14);
    }
    out.push(0);
    out
}

/// Record layout chosen by the writer.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    record_duration: String,
    samples_per_record: usize,
    n_records: usize,
}

/// Picks a record duration of a whole number of seconds (at most 100) that
/// holds a whole number of samples, preferring one that divides the signal
/// length so no padding is needed.
fn choose_layout(sampling_rate: f64, n_samples: usize) -> Result<Layout, FormatError> {
    let candidates: Vec<(u32, usize)> = (1..=100u32)
        .filter_map(|secs| {
            let spr = sampling_rate * f64::from(secs);
            let rounded = spr.round();
            ((spr - rounded).abs() <= 1e-9 * spr.max(1.0) && rounded >= 1.0)
                .then_some((secs, rounded as usize))
        })
        .collect();
    let (secs, spr) = candidates
        .iter()
        .find(|(_, spr)| n_samples.is_multiple_of(*spr))
        .or(candidates.first())
        .copied()
        .ok_or(FormatError::UnrepresentableSamplingRate(sampling_rate))?;
    Ok(Layout {
        record_duration: secs.to_string(),
        samples_per_record: spr,
        n_records: n_samples.div_ceil(spr),
    })
}

/// Formats `x` in at most eight characters, rounding towards `-inf`
/// (`up == false`) or `+inf` (`up == true`) so the written value bounds `x`.
fn format_bound(x: f64, up: bool) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mut best: Option<(f64, String)> = None;
    let mut consider = |s: String| {
        if s.len() > 8 {
            return;
        }
        let Ok(v) = s.parse::<f64>() else { return };
        if (up && v < x) || (!up && v > x) {
            return;
        }
        let err = (v - x).abs();
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, s));
        }
    };
    for decimals in 0..=7usize {
        let scale = 10f64.powi(decimals as i32);
        let r = if up {
            (x * scale).ceil()
        } else {
            (x * scale).floor()
        } / scale;
        consider(format!("{r:.decimals$}"));
    }
    let exp = x.abs().log10().floor() as i32;
    for digits in 0..=5usize {
        let scale = 10f64.powi(digits as i32 - exp);
        let m = if up {
            (x * scale).ceil()
        } else {
            (x * scale).floor()
        } / scale;
        consider(format!("{m:.digits$e}"));
    }
    best.map(|(_, s)| s).unwrap_or_else(|| {
        // Magnitudes beyond eight characters cannot be bounded.
        if up { "99999999" } else { "-9999999" }.to_string()
    })
}

fn dimension_label(unit: Unit) -> &'static str {
    match unit {
        Unit::Volt => "V",
        Unit::Millivolt => "mV",
        Unit::Microvolt => "uV",
        Unit::Unknown => "",
    }
}

fn put(out: &mut Vec<u8>, value: &str, width: usize) {
    let mut bytes: Vec<u8> = value
        .bytes()
        .map(|b| {
            if b.is_ascii_graphic() || b == b' ' {
                b
            } else {
                b'_'
            }
        })
        .take(width)
        .collect();
    bytes.resize(width, b' ');
    out.extend(bytes);
}

/// Encodes a recording as EDF+ (continuous) bytes.
///
/// Records span a whole number of seconds. If no such record length divides
/// the signal, the last record is padded by repeating the final sample.
/// Flat channels get a physical range of `value ± 1`.
pub fn encode_edf(rec: &Recording) -> Result<Vec<u8>, FormatError> {
    if rec.data().iter().any(|v| !v.is_finite()) {
        return Err(FormatError::NonFinite);
    }
    let n = rec.n_samples();
    let layout = choose_layout(rec.sampling_rate(), n)?;
    let record_secs: f64 = layout.record_duration.parse().expect("integer seconds");

    // Annotation bytes per record: one time-keeping TAL plus the events
    // whose onset falls inside it.
    let mut tals: Vec<Vec<u8>> = (0..layout.n_records)
        .map(|r| format_tal(r as f64 * record_secs, 0.0, &[]))
        .collect();
    for event in rec.events() {
        let r = ((event.onset / record_secs).floor() as usize).min(layout.n_records - 1);
        tals[r].extend(format_tal(event.onset, event.duration, &[&event.label]));
    }
    let annotation_spr = tals
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0)
        .div_ceil(2)
        .max(8);

    let mut ranges = Vec::with_capacity(rec.n_channels());
    for row in rec.data().rows() {
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut pmin, mut pmax) = (format_bound(lo, false), format_bound(hi, true));
        if pmin.parse::<f64>().unwrap() >= pmax.parse::<f64>().unwrap() {
            pmin = format_bound(lo - 1.0, false);
            pmax = format_bound(hi + 1.0, true);
        }
        ranges.push((pmin, pmax));
    }

    let ns = rec.n_channels() + 1;
    let mut out = Vec::with_capacity(
        256 * (ns + 1)
            + layout.n_records
                * 2
                * (layout.samples_per_record * rec.n_channels() + annotation_spr),
    );
    put(&mut out, "0", 8);
    put(&mut out, "X X X X", 80);
    put(&mut out, "Startdate X X X X", 80);
    put(&mut out, "01.01.85", 8);
    put(&mut out, "00.00.00", 8);
    put(&mut out, &(256 * (ns + 1)).to_string(), 8);
    put(&mut out, "EDF+C", 44);
    put(&mut out, &layout.n_records.to_string(), 8);
    put(&mut out, &layout.record_duration, 8);
    put(&mut out, &ns.to_string(), 4);

    let signal_fields: Vec<[String; 9]> = rec
        .channel_names()
        .iter()
        .zip(rec.units())
        .zip(&ranges)
        .map(|((name, unit), (pmin, pmax))| {
            [
                name.clone(),
                String::new(),
                dimension_label(*unit).to_string(),
                pmin.clone(),
                pmax.clone(),
                DIGITAL_MIN.to_string(),
                DIGITAL_MAX.to_string(),
                String::new(),
                layout.samples_per_record.to_string(),
            ]
        })
        .chain(std::iter::once([
            ANNOTATION_LABELS[0].to_string(),
            String::new(),
            String::new(),
            "-1".into(),
            "1".into(),
            "-32768".into(),
            "32767".into(),
            String::new(),
            annotation_spr.to_string(),
        ]))
        .collect();
    for (field, width) in [16, 80, 8, 8, 8, 8, 8, 80, 8].into_iter().enumerate() {
        for signal in &signal_fields {
            put(&mut out, &signal[field], width);
        }
    }
    for _ in 0..ns {
        put(&mut out, "", 32);
    }

    let scale: Vec<(f64, f64)> = ranges
        .iter()
        .map(|(lo, hi)| (lo.parse().unwrap(), hi.parse().unwrap()))
        .collect();
    let span = f64::from(DIGITAL_MAX - DIGITAL_MIN);
    for (r, tal) in tals.iter().enumerate() {
        for (ch, row) in rec.data().rows().into_iter().enumerate() {
            let (pmin, pmax) = scale[ch];
            for k in 0..layout.samples_per_record {
                let idx = (r * layout.samples_per_record + k).min(n - 1);
                let d = ((row[idx] - pmin) / (pmax - pmin) * span + f64::from(DIGITAL_MIN))
                    .round()
                    .clamp(f64::from(DIGITAL_MIN), f64::from(DIGITAL_MAX))
                    as i16;
                out.extend(d.to_le_bytes());
            }
        }
        let mut block = tal.clone();
        block.resize(annotation_spr * 2, 0);
        out.extend(block);
    }
    Ok(out)
}

pub fn write_edf(rec: &Recording, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let bytes = encode_edf(rec)?;
    std::fs::write(path, bytes).map_err(|source| FormatError::Unwritable {
        path: path.display().to_string(),
        source,
    })
}
