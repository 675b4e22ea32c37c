//! Synthetic inputs shared by the benchmarks.

use eegunify::Recording;
use ndarray::Array2;

/// `channels` channels of `seconds` at `fs`: a 10 Hz rhythm with a
/// per-channel phase, a slow drift and a deterministic pseudo-noise term.
pub fn synthetic(channels: usize, seconds: f64, fs: f64) -> Recording {
    let n = (seconds * fs).round() as usize;
    let data = Array2::from_shape_fn((channels, n), |(c, k)| {
        let t = k as f64 / fs;
        let phase = c as f64 * 0.7;
        let noise = ((k * 2_654_435_761 + c * 40_503) % 1_000) as f64 / 1_000.0 - 0.5;
        (2.0 * std::f64::consts::PI * 10.0 * t + phase).sin() + 0.3 * (0.5 * t).sin() + 0.2 * noise
    });
    Recording::from_data(data, fs).expect("generated shape is valid")
}
