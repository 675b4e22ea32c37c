//! Butterworth IIR design (bilinear transform) and zero-phase
//! forward-backward filtering in second-order sections.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rustfft::num_complex::Complex64;

use super::CleaningError;
use crate::recording::Recording;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Bandpass,
    Lowpass,
    Highpass,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::Bandpass => "bandpass",
            FilterKind::Lowpass => "lowpass",
            FilterKind::Highpass => "highpass",
        })
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bandpass" => Ok(FilterKind::Bandpass),
            "lowpass" => Ok(FilterKind::Lowpass),
            "highpass" => Ok(FilterKind::Highpass),
            other => Err(format!("unknown filter type {other:?}")),
        }
    }
}

/// One biquad, `b0 b1 b2 / 1 a1 a2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Section {
    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Complex response at `omega` radians per sample.
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2)
            / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }
}

fn check_band(
    kind: FilterKind,
    l: Option<f64>,
    h: Option<f64>,
    fs: f64,
) -> Result<(f64, f64), CleaningError> {
    let nyq = fs / 2.0;
    let bad = |msg: String| Err(CleaningError::InvalidBand(msg));
    let inside = |f: f64| f > 0.0 && f < nyq;
    match kind {
        FilterKind::Bandpass => match (l, h) {
            (Some(l), Some(h)) if inside(l) && inside(h) && l < h => Ok((l, h)),
            (Some(l), Some(h)) => bad(format!("need 0 < {l} < {h} < {nyq}")),
            _ => bad("bandpass needs both l_freq and h_freq".into()),
        },
        FilterKind::Lowpass => match h {
            Some(h) if inside(h) => Ok((0.0, h)),
            Some(h) => bad(format!("need 0 < {h} < {nyq}")),
            None => bad("lowpass needs h_freq".into()),
        },
        FilterKind::Highpass => match l {
            Some(l) if inside(l) => Ok((l, 0.0)),
            Some(l) => bad(format!("need 0 < {l} < {nyq}")),
            None => bad("highpass needs l_freq".into()),
        },
    }
}

/// Digital Butterworth filter of the given order as second-order sections.
/// A bandpass of order `n` has `2n` poles.
pub fn design_butterworth(
    kind: FilterKind,
    l_freq: Option<f64>,
    h_freq: Option<f64>,
    order: usize,
    fs: f64,
) -> Result<Vec<Section>, CleaningError> {
    if order == 0 {
        return Err(CleaningError::InvalidBand(
            "order must be at least 1".into(),
        ));
    }
    let (l, h) = check_band(kind, l_freq, h_freq, fs)?;
    let fs2 = 2.0 * fs;
    let warp = |f: f64| fs2 * (std::f64::consts::PI * f / fs).tan();

    let proto: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect();

    // Analog poles, number of zeros at s = 0, and gain.
    let (poles, zeros_at_origin, gain): (Vec<Complex64>, usize, f64) = match kind {
        FilterKind::Lowpass => {
            let wc = warp(h);
            (
                proto.iter().map(|p| p * wc).collect(),
                0,
                wc.powi(order as i32),
            )
        }
        FilterKind::Highpass => {
            let wc = warp(l);
            (proto.iter().map(|p| wc / p).collect(), order, 1.0)
        }
        FilterKind::Bandpass => {
            let (w1, w2) = (warp(l), warp(h));
            let bw = w2 - w1;
            let w0 = (w1 * w2).sqrt();
            let poles = proto
                .iter()
                .flat_map(|p| {
                    let half = p * (bw / 2.0);
                    let root = (half * half - w0 * w0).sqrt();
                    [half + root, half - root]
                })
                .collect();
            (poles, order, bw.powi(order as i32))
        }
    };

    // Bilinear transform. Zeros at the origin map to z = 1, zeros at
    // infinity to z = -1.
    let zd: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let mut k = gain;
    let mut num = Complex64::new(fs2.powi(zeros_at_origin as i32), 0.0);
    let mut den = Complex64::new(1.0, 0.0);
    for p in &poles {
        den *= fs2 - p;
    }
    num /= den;
    k *= num.re;

    let n_inf = poles.len() - zeros_at_origin;
    let mut zeros: Vec<f64> = Vec::with_capacity(poles.len());
    // Interleave so that each bandpass section gets one zero at each end.
    let (mut plus, mut minus) = (zeros_at_origin, n_inf);
    while plus + minus > 0 {
        if plus > 0 {
            zeros.push(1.0);
            plus -= 1;
        }
        if minus > 0 {
            zeros.push(-1.0);
            minus -= 1;
        }
    }
    if kind != FilterKind::Bandpass {
        zeros.sort_by(f64::total_cmp);
    }

    let tol = 1e-10;
    let mut complex: Vec<Complex64> = zd.iter().filter(|p| p.im > tol).copied().collect();
    complex.sort_by(|a, b| a.im.total_cmp(&b.im));
    let mut real: Vec<f64> = zd
        .iter()
        .filter(|p| p.im.abs() <= tol)
        .map(|p| p.re)
        .collect();
    real.sort_by(f64::total_cmp);

    let mut sections = Vec::new();
    let mut zi = zeros.into_iter();
    let quad_zeros = |zi: &mut std::vec::IntoIter<f64>| {
        let z1 = zi.next().expect("one zero per pole");
        let z2 = zi.next().expect("one zero per pole");
        [1.0, -(z1 + z2), z1 * z2]
    };
    for p in complex {
        sections.push(Section {
            b: quad_zeros(&mut zi),
            a: [1.0, -2.0 * p.re, p.norm_sqr()],
        });
    }
    let mut real_iter = real.chunks(2);
    for pair in &mut real_iter {
        if let [p1, p2] = pair {
            sections.push(Section {
                b: quad_zeros(&mut zi),
                a: [1.0, -(p1 + p2), p1 * p2],
            });
        } else {
            let z = zi.next().expect("one zero per pole");
            sections.push(Section {
                b: [1.0, -z, 0.0],
                a: [1.0, -pair[0], 0.0],
            });
        }
    }
    for b in &mut sections[0].b {
        *b *= k;
    }
    Ok(sections)
}

/// Padding used by [`sosfiltfilt`]: `3 (order + 1) ceil(fs / f_low)` samples,
/// at least 100, never more than `n - 1`.
pub fn pad_length(order: usize, fs: f64, f_low: f64, n: usize) -> usize {
    let base = 3 * (order + 1) * (fs / f_low).ceil() as usize;
    base.min(n.saturating_sub(1))
        .max(100)
        .min(n.saturating_sub(1))
}

fn sosfilt(sections: &[Section], x: &mut [f64], x0: f64) {
    let mut level = x0;
    for s in sections {
        let g = s.dc_gain();
        let mut z0 = (g - s.b[0]) * level;
        let mut z1 = (s.b[2] - s.a[2] * g) * level;
        for v in x.iter_mut() {
            let input = *v;
            let y = s.b[0] * input + z0;
            z0 = s.b[1] * input - s.a[1] * y + z1;
            z1 = s.b[2] * input - s.a[2] * y;
            *v = y;
        }
        level *= g;
    }
}

/// Zero-phase filtering with odd-extension padding and steady-state
/// initial conditions at both ends.
pub fn sosfiltfilt(sections: &[Section], x: ArrayView1<f64>, pad: usize) -> Array1<f64> {
    let n = x.len();
    let pad = pad.min(n.saturating_sub(1));
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend(x.iter());
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let first = ext[0];
    sosfilt(sections, &mut ext, first);
    ext.reverse();
    let first = ext[0];
    sosfilt(sections, &mut ext, first);
    ext.reverse();
    Array1::from(ext[pad..pad + n].to_vec())
}

/// Butterworth filter applied forward and backward to every channel.
pub fn bandpass_filter(
    rec: &Recording,
    kind: FilterKind,
    l_freq: Option<f64>,
    h_freq: Option<f64>,
    order: usize,
) -> Result<Recording, CleaningError> {
    let fs = rec.sampling_rate();
    let sections = design_butterworth(kind, l_freq, h_freq, order, fs)?;
    let n = rec.n_samples();
    if n <= 3 * order {
        return Err(CleaningError::TooShort {
            needed: 3 * order + 1,
            got: n,
        });
    }
    let (l, h) = check_band(kind, l_freq, h_freq, fs)?;
    let f_low = if kind == FilterKind::Lowpass { h } else { l };
    let pad = pad_length(order, fs, f_low, n);

    let mut out = Array2::zeros(rec.data().raw_dim());
    for (mut dst, src) in out.rows_mut().into_iter().zip(rec.data().rows()) {
        dst.assign(&sosfiltfilt(&sections, src, pad));
    }
    Ok(rec.with_data(out)?)
}
