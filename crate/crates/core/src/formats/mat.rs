//! MAT-file level 5 reader (uncompressed and zlib-compressed elements).
//!
//! Only what is needed to pull a signal out of a file is decoded: numeric
//! matrices, char arrays and cell arrays of char. Structs, sparse matrices
//! and objects are skipped. HDF5-based v7.3 files are rejected.

use std::io::Read;
use std::path::Path;

use flate2::read::ZlibDecoder;
use ndarray::Array2;

use super::{normalize_channel_name, FormatError, Inferred, Parsed, ReadHints};
use crate::recording::{default_channel_names, Recording, Unit};

const MI_INT8: u32 = 1;
const MI_UINT8: u32 = 2;
const MI_INT16: u32 = 3;
const MI_UINT16: u32 = 4;
const MI_INT32: u32 = 5;
const MI_UINT32: u32 = 6;
const MI_SINGLE: u32 = 7;
const MI_DOUBLE: u32 = 9;
const MI_INT64: u32 = 12;
const MI_UINT64: u32 = 13;
const MI_MATRIX: u32 = 14;
const MI_COMPRESSED: u32 = 15;
const MI_UTF8: u32 = 16;
const MI_UTF16: u32 = 17;
const MI_UTF32: u32 = 18;

const MX_CELL: u8 = 1;
const MX_CHAR: u8 = 4;

const RATE_NAMES: [&str; 8] = [
    "fs",
    "srate",
    "sfreq",
    "sampling_rate",
    "samplingrate",
    "sample_rate",
    "fsample",
    "samplerate",
];
const LABEL_NAMES: [&str; 8] = [
    "channels",
    "labels",
    "channel_names",
    "ch_names",
    "chan_names",
    "chanlabels",
    "channel_labels",
    "label",
];

#[derive(Debug, Clone, PartialEq)]
pub enum MatValue {
    /// Real part of a numeric array, column-major.
    Numeric {
        dims: Vec<usize>,
        data: Vec<f64>,
    },
    /// Rows of a char matrix.
    Char(Vec<String>),
    Cell {
        dims: Vec<usize>,
        items: Vec<MatValue>,
    },
    Unsupported,
}

impl MatValue {
    fn strings(&self) -> Option<Vec<String>> {
        match self {
            MatValue::Char(rows) => Some(rows.clone()),
            MatValue::Cell { items, .. } => items
                .iter()
                .map(|v| match v {
                    MatValue::Char(rows) => Some(rows.concat()),
                    _ => None,
                })
                .collect(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

struct Reader<'a> {
    buf: &'a [u8],
    endian: Endian,
}

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::MalformedMat(msg.into())
}

impl<'a> Reader<'a> {
    fn u32_at(&self, pos: usize) -> Result<u32, FormatError> {
        let b: [u8; 4] = self
            .buf
            .get(pos..pos + 4)
            .ok_or_else(|| malformed("unexpected end of data"))?
            .try_into()
            .expect("4 bytes");
        Ok(match self.endian {
            Endian::Little => u32::from_le_bytes(b),
            Endian::Big => u32::from_be_bytes(b),
        })
    }

    /// Reads one data element at `pos`: `(type, payload, next position)`.
    fn element(&self, pos: usize) -> Result<(u32, &'a [u8], usize), FormatError> {
        let tag = self.u32_at(pos)?;
        if tag >> 16 != 0 {
            // Small data element: type and size packed into 4 bytes.
            let (ty, size) = (tag & 0xFFFF, (tag >> 16) as usize);
            if size > 4 {
                return Err(malformed("small element larger than 4 bytes"));
            }
            let data = self
                .buf
                .get(pos + 4..pos + 4 + size)
                .ok_or_else(|| malformed("truncated small element"))?;
            return Ok((ty, data, pos + 8));
        }
        let size = self.u32_at(pos + 4)? as usize;
        let start = pos + 8;
        let data = self
            .buf
            .get(start..start + size)
            .ok_or_else(|| malformed("element runs past end of file"))?;
        let next = if tag == MI_COMPRESSED {
            start + size
        } else {
            start + size.div_ceil(8) * 8
        };
        Ok((tag, data, next))
    }

    fn numbers(&self, ty: u32, data: &[u8]) -> Result<Vec<f64>, FormatError> {
        macro_rules! conv {
            ($t:ty, $n:expr) => {
                data.chunks_exact($n)
                    .map(|c| {
                        let b: [u8; $n] = c.try_into().expect("chunk");
                        (match self.endian {
                            Endian::Little => <$t>::from_le_bytes(b),
                            Endian::Big => <$t>::from_be_bytes(b),
                        }) as f64
                    })
                    .collect()
            };
        }
        Ok(match ty {
            MI_INT8 => data.iter().map(|&b| f64::from(b as i8)).collect(),
            MI_UINT8 | MI_UTF8 => data.iter().map(|&b| f64::from(b)).collect(),
            MI_INT16 => conv!(i16, 2),
            MI_UINT16 | MI_UTF16 => conv!(u16, 2),
            MI_INT32 => conv!(i32, 4),
            MI_UINT32 | MI_UTF32 => conv!(u32, 4),
            MI_SINGLE => conv!(f32, 4),
            MI_DOUBLE => conv!(f64, 8),
            MI_INT64 => conv!(i64, 8),
            MI_UINT64 => conv!(u64, 8),
            other => return Err(malformed(format!("unsupported numeric type {other}"))),
        })
    }

    /// Decodes the payload of an miMATRIX element.
    fn matrix(&self, payload: &'a [u8]) -> Result<(String, MatValue), FormatError> {
        if payload.is_empty() {
            return Ok((String::new(), MatValue::Unsupported));
        }
        let sub = Reader {
            buf: payload,
            endian: self.endian,
        };
        let (_, flags, pos) = sub.element(0)?;
        let class = match (flags.len() >= 4, self.endian) {
            (true, Endian::Little) => flags[0],
            (true, Endian::Big) => flags[3],
            _ => return Err(malformed("array flags too short")),
        };
        let (dty, dims_raw, pos) = sub.element(pos)?;
        let dims: Vec<usize> = sub
            .numbers(dty, dims_raw)?
            .into_iter()
            .map(|d| d.max(0.0) as usize)
            .collect();
        let (_, name_raw, pos) = sub.element(pos)?;
        let name = String::from_utf8_lossy(name_raw)
            .trim_end_matches('\0')
            .to_string();
        let numel: usize = dims.iter().product();

        let value = match class {
            6..=15 => {
                let (ty, real, _) = sub.element(pos)?;
                let data = sub.numbers(ty, real)?;
                if data.len() != numel {
                    return Err(malformed(format!(
                        "{name}: {} values for dimensions {dims:?}",
                        data.len()
                    )));
                }
                MatValue::Numeric { dims, data }
            }
            MX_CHAR => {
                let (ty, raw, _) = if numel == 0 {
                    (MI_UINT16, &[][..], 0)
                } else {
                    sub.element(pos)?
                };
                let codes: Vec<u32> = match ty {
                    MI_UTF8 | MI_UINT8 | MI_INT8 => String::from_utf8_lossy(raw)
                        .chars()
                        .map(u32::from)
                        .collect(),
                    _ => sub
                        .numbers(ty, raw)?
                        .into_iter()
                        .map(|c| c as u32)
                        .collect(),
                };
                let rows = dims.first().copied().unwrap_or(0);
                let cols = codes.len().checked_div(rows).unwrap_or(0);
                let strings = (0..rows)
                    .map(|r| {
                        (0..cols)
                            .filter_map(|c| char::from_u32(codes[c * rows + r]))
                            .collect::<String>()
                            .trim_end()
                            .to_string()
                    })
                    .collect();
                MatValue::Char(strings)
            }
            MX_CELL => {
                let mut items = Vec::with_capacity(numel);
                let mut p = pos;
                for _ in 0..numel {
                    let (ty, inner, next) = sub.element(p)?;
                    if ty != MI_MATRIX {
                        return Err(malformed("cell element is not a matrix"));
                    }
                    items.push(sub.matrix(inner)?.1);
                    p = next;
                }
                MatValue::Cell { dims, items }
            }
            _ => MatValue::Unsupported,
        };
        Ok((name, value))
    }
}

/// Decodes every top-level variable in a MAT v5 file.
pub fn parse_variables(bytes: &[u8]) -> Result<Vec<(String, MatValue)>, FormatError> {
    if bytes.len() < 128 {
        return Err(malformed("file shorter than the 128-byte header"));
    }
    let text = String::from_utf8_lossy(&bytes[..116]);
    if text.starts_with("MATLAB 7.3") {
        return Err(FormatError::UnsupportedMatVersion("7.3 (HDF5)".into()));
    }
    if !text.starts_with("MATLAB 5.0") {
        return Err(malformed("missing MATLAB 5.0 header text"));
    }
    let endian = match &bytes[126..128] {
        b"IM" => Endian::Little,
        b"MI" => Endian::Big,
        _ => return Err(malformed("bad endian indicator")),
    };
    let version = match endian {
        Endian::Little => u16::from_le_bytes([bytes[124], bytes[125]]),
        Endian::Big => u16::from_be_bytes([bytes[124], bytes[125]]),
    };
    if version != 0x0100 {
        return Err(FormatError::UnsupportedMatVersion(format!(
            "{version:#06x}"
        )));
    }

    let top = Reader { buf: bytes, endian };
    let mut vars = Vec::new();
    let mut pos = 128;
    while pos + 8 <= bytes.len() {
        let (ty, payload, next) = top.element(pos)?;
        match ty {
            MI_MATRIX => vars.push(top.matrix(payload)?),
            MI_COMPRESSED => {
                let mut inflated = Vec::new();
                ZlibDecoder::new(payload)
                    .read_to_end(&mut inflated)
                    .map_err(|e| malformed(format!("zlib: {e}")))?;
                let inner = Reader {
                    buf: &inflated,
                    endian,
                };
                let mut p = 0;
                while p + 8 <= inflated.len() {
                    let (ty, payload, next) = inner.element(p)?;
                    if ty == MI_MATRIX {
                        vars.push(inner.matrix(payload)?);
                    }
                    p = next;
                }
            }
            _ => {}
        }
        pos = next;
    }
    Ok(vars)
}

pub fn read_mat_v5(path: impl AsRef<Path>, hints: &ReadHints) -> Result<Parsed, FormatError> {
    let path = path.as_ref();
    let bytes = super::read_file(path)?;
    parse_mat(&bytes, hints, &path.display().to_string())
}

/// Builds a recording from the largest 2-D numeric array in the file.
///
/// Samples run along the longer axis (a square array is read as rows =
/// channels). A scalar named like `fs`/`srate`/`sfreq` gives the sampling
/// rate; a cell or char variable named like `channels`/`labels` gives the
/// channel names.
pub fn parse_mat(bytes: &[u8], hints: &ReadHints, source: &str) -> Result<Parsed, FormatError> {
    let vars = parse_variables(bytes)?;
    let lower = |s: &str| s.to_ascii_lowercase();

    let rate = vars.iter().find_map(|(name, v)| match v {
        MatValue::Numeric { data, .. }
            if data.len() == 1 && RATE_NAMES.contains(&lower(name).as_str()) =>
        {
            Some(data[0]).filter(|x| x.is_finite() && *x > 0.0)
        }
        _ => None,
    });
    let labels = vars.iter().find_map(|(name, v)| {
        LABEL_NAMES
            .contains(&lower(name).as_str())
            .then(|| v.strings())
            .flatten()
    });

    let (name, dims, data) = vars
        .iter()
        .filter_map(|(name, v)| match v {
            MatValue::Numeric { dims, data } if dims.len() == 2 && data.len() > 1 => {
                Some((name, dims, data))
            }
            _ => None,
        })
        .fold(
            None::<(&String, &Vec<usize>, &Vec<f64>)>,
            |best, cur| match best {
                Some(b) if b.2.len() >= cur.2.len() => Some(b),
                _ => Some(cur),
            },
        )
        .ok_or(FormatError::NoNumericArray)?;
    let (rows, cols) = (dims[0], dims[1]);
    let (channels, samples) = if cols >= rows {
        (rows, cols)
    } else {
        (cols, rows)
    };
    // Column-major storage: element (r, c) lives at c * rows + r.
    let matrix = Array2::from_shape_fn((channels, samples), |(ch, s)| {
        if cols >= rows {
            data[s * rows + ch]
        } else {
            data[ch * rows + s]
        }
    });
    log::debug!("{source}: using variable {name:?} ({rows}x{cols})");

    let mut inferred = Inferred::default();
    let sampling_rate = match rate {
        Some(r) => r,
        None => {
            inferred.sampling_rate = true;
            hints
                .sampling_rate
                .ok_or(FormatError::MissingSamplingRate)?
        }
    };
    let names = match labels.filter(|l| l.len() == channels) {
        Some(l) => l.iter().map(|s| normalize_channel_name(s)).collect(),
        None => {
            inferred.channel_names = true;
            hints
                .channel_names
                .clone()
                .filter(|h| h.len() == channels)
                .unwrap_or_else(|| default_channel_names(channels))
        }
    };
    let recording = Recording::new(
        matrix,
        sampling_rate,
        names,
        vec![Unit::Unknown; channels],
        Vec::new(),
        source,
    )?;
    Ok(Parsed {
        recording,
        inferred,
    })
}
