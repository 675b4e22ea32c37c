//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};

use super::UnificationError;
use crate::recording::Recording;

const MAX_DENOMINATOR: u64 = 1000;
const KAISER_BETA: f64 = 8.6;

/// Smallest `(L, M)` with `M <= 1000` and `|L/M - ratio| <= 1e-9 * ratio`.
pub fn rational_ratio(ratio: f64) -> Result<(u64, u64), UnificationError> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(UnificationError::RatioOverflow(ratio));
    }
    for m in 1..=MAX_DENOMINATOR {
        let l = (ratio * m as f64).round();
        if l >= 1.0 && (l / m as f64 - ratio).abs() <= 1e-9 * ratio {
            return Ok((l as u64, m));
        }
    }
    Err(UnificationError::RatioOverflow(ratio))
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Low-pass taps at the upsampled rate, odd length, DC gain `up`.
fn design_taps(up: u64, cutoff: f64, transition: f64) -> Vec<f64> {
    // Attenuation implied by beta = 0.1102 (A - 8.7).
    let atten = KAISER_BETA / 0.1102 + 8.7;
    let n = ((atten - 7.95) / (2.285 * 2.0 * PI * transition)).ceil() as usize;
    let n = n.max(3) | 1;
    let centre = (n - 1) as f64 / 2.0;
    let i0_beta = bessel_i0(KAISER_BETA);
    (0..n)
        .map(|j| {
            let t = j as f64 - centre;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = t / centre;
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            up as f64 * sinc * window
        })
        .collect()
}

fn resample_channel(
    x: ArrayView1<f64>,
    up: u64,
    down: u64,
    taps: &[f64],
    out_len: usize,
) -> Vec<f64> {
    let n = x.len();
    let (up, down) = (up as usize, down as usize);
    let half = (taps.len() - 1) / 2;
    let pad = (half / up + 2).min(n - 1);
    // Odd extension about the end samples.
    let mut xp = Vec::with_capacity(n + 2 * pad);
    xp.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    xp.extend(x.iter());
    xp.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    (0..out_len)
        .map(|m| {
            // Position in the zero-stuffed signal, delay compensated.
            let u = (pad * up + m * down + half) as isize;
            let first = u.rem_euclid(up as isize) as usize;
            let mut acc = 0.0;
            let mut j = first;
            while j < taps.len() {
                let idx = (u - j as isize) / up as isize;
                if idx >= 0 && (idx as usize) < xp.len() {
                    acc += taps[j] * xp[idx as usize];
                }
                j += up;
            }
            acc
        })
        .collect()
}

/// Resamples every channel to `new_sfreq`; event onsets keep their times.
pub fn resample(rec: &Recording, new_sfreq: f64) -> Result<Recording, UnificationError> {
    if !(new_sfreq > 0.0 && new_sfreq.is_finite()) {
        return Err(UnificationError::BadSamplingRate(new_sfreq));
    }
    let old = rec.sampling_rate();
    let (up, down) = rational_ratio(new_sfreq / old)?;
    if up == down {
        return Ok(rec.clone());
    }
    let n = rec.n_samples();
    let out_len = ((n as f64 * up as f64 / down as f64).round() as usize).max(1);
    if n < 2 {
        return Err(UnificationError::TooShort { needed: 2, got: n });
    }
    let fs_up = old * up as f64;
    let narrow = old.min(new_sfreq);
    let taps = design_taps(up, 0.45 * narrow / fs_up, 0.1 * narrow / fs_up);

    let mut out = Array2::zeros((rec.n_channels(), out_len));
    for (mut dst, src) in out.rows_mut().into_iter().zip(rec.data().rows()) {
        let y = resample_channel(src, up, down, &taps, out_len);
        dst.iter_mut().zip(y).for_each(|(d, v)| *d = v);
    }
    let resampled = rec.clone().with_sampling_rate(new_sfreq)?;
    Ok(resampled.with_data(out)?)
}
