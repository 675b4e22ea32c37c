use serde::{Deserialize, Serialize};

use super::CleaningError;
use crate::metrics::{band_power, welch};
use crate::recording::Recording;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelQuality {
    pub channel: String,
    pub s_clip: f64,
    pub s_flat: f64,
    pub s_line: f64,
    pub s_hf: f64,
}

/// Composite 0-100 score from four sub-scores in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub score: f64,
    pub s_clip: f64,
    pub s_flat: f64,
    pub s_line: f64,
    pub s_hf: f64,
    pub channels: Vec<ChannelQuality>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn sub(scale: f64, fraction: f64) -> f64 {
    1.0 - (scale * fraction).min(1.0)
}

fn channel_quality(
    name: &str,
    x: ndarray::ArrayView1<f64>,
    fs: f64,
) -> Result<ChannelQuality, CleaningError> {
    let n = x.len();
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let extremes = x.iter().filter(|&&v| v == lo || v == hi).count();
    let flat_steps = x.windows(2).into_iter().filter(|w| w[1] == w[0]).count();

    let psd = welch(x, fs)?;
    let nyquist = fs / 2.0;
    let line = band_power(&psd, 49.0, 51.0) + band_power(&psd, 59.0, 61.0);
    let hi_hf = 100.0f64.min(nyquist);
    let hf = if hi_hf >= 60.0 {
        band_power(&psd, 60.0, hi_hf)
    } else {
        0.0
    };

    Ok(ChannelQuality {
        channel: name.to_string(),
        s_clip: sub(10.0, extremes as f64 / n as f64),
        s_flat: sub(2.0, ratio(flat_steps as f64, (n - 1) as f64)),
        s_line: sub(
            5.0,
            ratio(line, band_power(&psd, 1.0, 75.0f64.min(nyquist))),
        ),
        s_hf: sub(2.0, ratio(hf, band_power(&psd, 1.0, hi_hf))),
    })
}

pub fn quality_score(rec: &Recording) -> Result<QualityReport, CleaningError> {
    let fs = rec.sampling_rate();
    let needed = (2.0 * fs).ceil() as usize;
    if rec.n_samples() < needed {
        return Err(CleaningError::TooShort {
            needed,
            got: rec.n_samples(),
        });
    }
    let channels: Vec<ChannelQuality> = rec
        .channel_names()
        .iter()
        .zip(rec.data().rows())
        .map(|(name, row)| channel_quality(name, row, fs))
        .collect::<Result<_, _>>()?;
    let mean =
        |f: fn(&ChannelQuality) -> f64| channels.iter().map(f).sum::<f64>() / channels.len() as f64;
    let (s_clip, s_flat, s_line, s_hf) = (
        mean(|c| c.s_clip),
        mean(|c| c.s_flat),
        mean(|c| c.s_line),
        mean(|c| c.s_hf),
    );
    Ok(QualityReport {
        score: 100.0 * (s_clip + s_flat + s_line + s_hf) / 4.0,
        s_clip,
        s_flat,
        s_line,
        s_hf,
        channels,
    })
}
