use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::{ensure_dir, sample_completed, svg, write_text, MetricsError};
use crate::formats::load_recording;
use crate::locator::LocatorTable;
use crate::recording::Recording;

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub channel_names: Vec<String>,
    pub matrix: Array2<f64>,
    /// Channels with zero variance; their off-diagonal entries are 0.
    pub flat: Vec<bool>,
}

/// Pearson correlation between every pair of channels.
pub fn channel_correlation(rec: &Recording) -> Result<Correlation, MetricsError> {
    let n = rec.n_samples();
    if n < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: n });
    }
    let data = rec.data();
    let means = data.mean_axis(Axis(1)).expect("at least one sample");
    let centered = data - &means.insert_axis(Axis(1));
    let c = rec.n_channels();
    let norms: Vec<f64> = centered
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect();
    let flat: Vec<bool> = norms.iter().map(|&s| s == 0.0).collect();

    let mut matrix = Array2::<f64>::eye(c);
    for i in 0..c {
        for j in i + 1..c {
            let r = if flat[i] || flat[j] {
                0.0
            } else {
                (centered.row(i).dot(&centered.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            matrix[[i, j]] = r;
            matrix[[j, i]] = r;
        }
    }
    Ok(Correlation {
        channel_names: rec.channel_names().to_vec(),
        matrix,
        flat,
    })
}

/// `(columns, rows)` for `k` panels: ceil(sqrt(k)) wide.
pub fn grid_shape(k: usize) -> (usize, usize) {
    if k == 0 {
        return (0, 0);
    }
    let cols = (k as f64).sqrt().ceil() as usize;
    (cols, k.div_ceil(cols))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGrid {
    pub columns: usize,
    pub rows: usize,
    pub panels: Vec<(String, Correlation)>,
    pub files: Vec<PathBuf>,
}

/// Correlation matrices for a seeded random sample of Completed rows. With
/// `out_dir`, writes one `corr_<i>.csv` per sample and `corr_grid.svg`.
pub fn correlation_grid(
    table: &LocatorTable,
    max_sample: usize,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<CorrelationGrid, MetricsError> {
    let rows = sample_completed(table, max_sample, seed)?;
    let panels: Vec<(String, Correlation)> = rows
        .par_iter()
        .map(|row| {
            let rec = load_recording(row).map_err(|source| MetricsError::Load {
                path: row.file_path.clone(),
                source,
            })?;
            Ok((row.file_path.clone(), channel_correlation(&rec)?))
        })
        .collect::<Result<_, MetricsError>>()?;
    let (columns, grid_rows) = grid_shape(panels.len());

    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        let dir = ensure_dir(dir)?;
        for (i, (path, corr)) in panels.iter().enumerate() {
            let csv_path = dir.join(format!("corr_{i}.csv"));
            write_text(&csv_path, &matrix_csv(path, corr))?;
            files.push(csv_path);
        }
        let titled: Vec<(String, Array2<f64>)> = panels
            .iter()
            .map(|(p, c)| {
                let name = Path::new(p)
                    .file_name()
                    .map_or_else(|| p.clone(), |n| n.to_string_lossy().into_owned());
                (name, c.matrix.clone())
            })
            .collect();
        let svg_path = dir.join("corr_grid.svg");
        write_text(&svg_path, &svg::heatmap_grid(&titled, columns, grid_rows))?;
        files.push(svg_path);
    }
    Ok(CorrelationGrid {
        columns,
        rows: grid_rows,
        panels,
        files,
    })
}

fn matrix_csv(source: &str, corr: &Correlation) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec![source.to_string()];
    header.extend(corr.channel_names.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (name, row) in corr.channel_names.iter().zip(corr.matrix.rows()) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
