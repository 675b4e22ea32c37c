use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::UnificationError;
use crate::recording::Recording;

/// Per-channel population mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormFactors {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn compute_norm_factors(rec: &Recording) -> Result<NormFactors, UnificationError> {
    let n = rec.n_samples();
    if n < 2 {
        return Err(UnificationError::TooShort { needed: 2, got: n });
    }
    let (mean, std) = rec
        .data()
        .rows()
        .into_iter()
        .map(|row| {
            let m = row.sum() / n as f64;
            let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            (m, var.sqrt())
        })
        .unzip();
    Ok(NormFactors { mean, std })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub recording: Recording,
    /// Channels left untouched because their std is 0.
    pub flat: Vec<bool>,
}

pub fn apply_normalization(
    rec: &Recording,
    factors: &NormFactors,
) -> Result<Normalized, UnificationError> {
    let c = rec.n_channels();
    for got in [factors.mean.len(), factors.std.len()] {
        if got != c {
            return Err(UnificationError::LengthMismatch { expected: c, got });
        }
    }
    let mut data: Array2<f64> = rec.data().clone();
    let mut flat = vec![false; c];
    for (ch, mut row) in data.rows_mut().into_iter().enumerate() {
        let (m, s) = (factors.mean[ch], factors.std[ch]);
        if s == 0.0 {
            flat[ch] = true;
        } else {
            row.mapv_inplace(|v| (v - m) / s);
        }
    }
    Ok(Normalized {
        recording: rec.with_data(data)?,
        flat,
    })
}
