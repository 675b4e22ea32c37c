use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::svg::{self, Series};
use super::{ensure_dir, sample_completed, spectral, write_text, MetricsError};
use crate::formats::load_recording;
use crate::locator::LocatorTable;
use crate::recording::Recording;

const GRID_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }

    /// Band edges in Hz.
    pub fn range(self) -> (f64, f64) {
        match self {
            Band::Theta => (4.0, 8.0),
            Band::Alpha => (8.0, 13.0),
            Band::Beta => (13.0, 30.0),
            Band::Gamma => (30.0, 49.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandCurve {
    pub band: Band,
    pub freqs: Vec<f64>,
    /// `(file path, magnitude per grid frequency)`.
    pub samples: Vec<(String, Vec<f64>)>,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandCurves {
    pub curves: Vec<BandCurve>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveOptions {
    pub max_sample: usize,
    pub seed: u64,
    /// Scale each per-sample curve so its maximum is 1.
    pub normalize: bool,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            max_sample: 10,
            seed: 0,
            normalize: false,
        }
    }
}

/// sqrt(PSD) averaged over channels, evaluated on `grid` by linear
/// interpolation.
fn magnitude_on_grid(rec: &Recording, grid: &[f64]) -> Result<Vec<f64>, MetricsError> {
    let mut acc = vec![0.0; grid.len()];
    for ch in 0..rec.n_channels() {
        let psd = spectral::welch_psd(rec, ch)?;
        let mag: Vec<f64> = psd.density.iter().map(|p| p.sqrt()).collect();
        for (a, &f) in acc.iter_mut().zip(grid) {
            *a += interpolate(&psd.freqs, &mag, f);
        }
    }
    let n = rec.n_channels() as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v < x);
    if i == 0 {
        return ys[0];
    }
    if i >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

fn band_grid(band: Band, nyquist: f64) -> Vec<f64> {
    let (lo, hi) = band.range();
    let hi = hi.min(nyquist);
    let steps = ((hi - lo) / GRID_STEP + 1e-9).floor();
    if steps < 0.0 {
        return Vec::new();
    }
    (0..=steps as usize)
        .map(|k| lo + k as f64 * GRID_STEP)
        .collect()
}

/// Magnitude-frequency curves per band over a seeded random sample of
/// Completed rows. With `out_dir`, writes `freq_<band>.csv` and
/// `freq_<band>.svg` for each band.
pub fn band_curves(
    table: &LocatorTable,
    opts: CurveOptions,
    out_dir: Option<&Path>,
) -> Result<BandCurves, MetricsError> {
    let rows = sample_completed(table, opts.max_sample, opts.seed)?;
    let recordings: Vec<Recording> = rows
        .par_iter()
        .map(|row| {
            load_recording(row).map_err(|source| MetricsError::Load {
                path: row.file_path.clone(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let nyquist = recordings
        .iter()
        .map(|r| r.sampling_rate() / 2.0)
        .fold(f64::INFINITY, f64::min);

    let full_grid: Vec<f64> = Band::ALL
        .iter()
        .flat_map(|b| band_grid(*b, nyquist))
        .collect();
    let magnitudes: Vec<Vec<f64>> = recordings
        .par_iter()
        .map(|r| magnitude_on_grid(r, &full_grid))
        .collect::<Result<_, _>>()?;

    let mut curves = Vec::new();
    let mut offset = 0;
    for band in Band::ALL {
        let freqs = band_grid(band, nyquist);
        let len = freqs.len();
        let samples: Vec<(String, Vec<f64>)> = rows
            .iter()
            .zip(&magnitudes)
            .map(|(row, mag)| {
                let mut curve = mag[offset..offset + len].to_vec();
                if opts.normalize {
                    let peak = curve.iter().copied().fold(0.0, f64::max);
                    if peak > 0.0 {
                        curve.iter_mut().for_each(|v| *v /= peak);
                    }
                }
                (row.file_path.clone(), curve)
            })
            .collect();
        offset += len;
        let mean = (0..len)
            .map(|i| samples.iter().map(|(_, c)| c[i]).sum::<f64>() / samples.len() as f64)
            .collect();
        curves.push(BandCurve {
            band,
            freqs,
            samples,
            mean,
        });
    }

    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        let dir = ensure_dir(dir)?;
        for curve in &curves {
            let csv_path = dir.join(format!("freq_{}.csv", curve.band.name()));
            write_text(&csv_path, &curve_csv(curve))?;
            let svg_path = dir.join(format!("freq_{}.svg", curve.band.name()));
            write_text(&svg_path, &curve_svg(curve))?;
            files.push(csv_path);
            files.push(svg_path);
        }
    }
    Ok(BandCurves { curves, files })
}

fn curve_csv(curve: &BandCurve) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["frequency_hz".to_string()];
    header.extend(curve.samples.iter().map(|(p, _)| p.clone()));
    header.push("mean".to_string());
    w.write_record(&header).expect("in-memory write");
    for (i, f) in curve.freqs.iter().enumerate() {
        let mut rec = vec![f.to_string()];
        rec.extend(curve.samples.iter().map(|(_, c)| c[i].to_string()));
        rec.push(curve.mean[i].to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn curve_svg(curve: &BandCurve) -> String {
    let mut series: Vec<Series> = curve
        .samples
        .iter()
        .map(|(_, c)| Series {
            y: c,
            color: "#b0b0b0",
            width: 1.0,
        })
        .collect();
    series.push(Series {
        y: &curve.mean,
        color: "#1f4fd1",
        width: 3.0,
    });
    let (lo, hi) = curve.band.range();
    svg::line_plot(
        &format!("{} ({lo}-{hi} Hz)", curve.band.name()),
        "frequency (Hz)",
        &curve.freqs,
        &series,
    )
}
