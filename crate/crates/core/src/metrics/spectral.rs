use ndarray::ArrayView1;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::MetricsError;
use crate::recording::Recording;

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }
}

/// Welch estimate for one channel of `rec`.
pub fn welch_psd(rec: &Recording, channel: usize) -> Result<Psd, MetricsError> {
    if channel >= rec.n_channels() {
        return Err(MetricsError::NoSuchChannel {
            index: channel,
            channels: rec.n_channels(),
        });
    }
    welch(rec.data().row(channel), rec.sampling_rate())
}

/// Welch estimate: periodic Hann window, segments of
/// `min(n, round(2 * fs))` samples, 50% overlap, no detrending, averaged
/// periodograms scaled to a one-sided density.
pub fn welch(x: ArrayView1<f64>, fs: f64) -> Result<Psd, MetricsError> {
    let n = x.len();
    let nperseg = ((2.0 * fs).round() as usize).min(n);
    let step = nperseg - nperseg / 2;
    if nperseg < 2 || n < nperseg + step {
        let full = ((2.0 * fs).round() as usize).max(2);
        return Err(MetricsError::TooShort {
            needed: full + full - full / 2,
            got: n,
        });
    }
    let n_seg = (n - nperseg) / step + 1;

    let window: Vec<f64> = (0..nperseg)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / nperseg as f64).cos())
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nperseg);

    let n_bins = nperseg / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    for s in 0..n_seg {
        let start = s * step;
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(x[start + k] * window[k], 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
    }

    let scale = 1.0 / (fs * win_power * n_seg as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = k != 0 && !(nperseg.is_multiple_of(2) && k == nperseg / 2);
            p * scale * if one_sided { 2.0 } else { 1.0 }
        })
        .collect();
    let freqs = (0..n_bins)
        .map(|k| k as f64 * fs / nperseg as f64)
        .collect();
    Ok(Psd { freqs, density })
}

/// Power in `[lo, hi]` Hz (inclusive bins), rectangle rule.
pub fn band_power(psd: &Psd, lo: f64, hi: f64) -> f64 {
    let df = psd.resolution();
    psd.freqs
        .iter()
        .zip(&psd.density)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(_, p)| p * df)
        .sum()
}
