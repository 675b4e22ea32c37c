//! Symmetric FastICA with a tanh nonlinearity.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::CleaningError;
use crate::recording::Recording;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastIcaOptions {
    pub max_components: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FastIcaOptions {
    fn default() -> Self {
        FastIcaOptions {
            max_components: 20,
            tol: 1e-4,
            max_iter: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaDecomposition {
    /// Channel means removed before whitening.
    pub means: Array1<f64>,
    /// components x channels.
    pub whitening: Array2<f64>,
    /// components x channels; `unmixing = W * whitening`.
    pub unmixing: Array2<f64>,
    /// channels x components.
    pub mixing: Array2<f64>,
    /// components x samples.
    pub sources: Array2<f64>,
    pub kurtosis: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl IcaDecomposition {
    pub fn n_components(&self) -> usize {
        self.unmixing.nrows()
    }
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn to_nd(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// `(W W^T)^{-1/2} W`, which makes the rows of `W` orthonormal.
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|d| 1.0 / d.max(f64::MIN_POSITIVE).sqrt()),
    );
    &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w
}

/// Population excess kurtosis.
pub fn excess_kurtosis(x: ndarray::ArrayView1<f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mean) * (v - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        0.0
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

pub fn fastica(rec: &Recording, opts: FastIcaOptions) -> Result<IcaDecomposition, CleaningError> {
    let c = rec.n_channels();
    let n = rec.n_samples();
    if c < 2 {
        return Err(CleaningError::TooFewChannels(c));
    }
    if n < 10 * c {
        return Err(CleaningError::TooShort {
            needed: 10 * c,
            got: n,
        });
    }
    let data = rec.data();
    let means = data.mean_axis(Axis(1)).expect("nonempty");
    let centered = data - &means.view().insert_axis(Axis(1));
    let cov = centered.dot(&centered.t()) / n as f64;

    let eig = SymmetricEigen::new(to_na(&cov));
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| top > 0.0 && eig.eigenvalues[i] > 1e-12 * top)
        .take(opts.max_components)
        .collect();
    let k = keep.len();
    if k == 0 {
        return Err(CleaningError::RankDeficient);
    }

    // whitening = D^{-1/2} E^T, dewhitening = E D^{1/2}.
    let mut whitening = Array2::zeros((k, c));
    let mut dewhitening = Array2::zeros((c, k));
    for (r, &i) in keep.iter().enumerate() {
        let d = eig.eigenvalues[i];
        for ch in 0..c {
            let e = eig.eigenvectors[(ch, i)];
            whitening[[r, ch]] = e / d.sqrt();
            dewhitening[[ch, r]] = e * d.sqrt();
        }
    }
    let z = to_na(&whitening.dot(&centered));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);
    let mut converged = false;
    let mut iterations = 0;
    let inv_n = 1.0 / n as f64;
    for it in 1..=opts.max_iter {
        iterations = it;
        let mut g = &w * &z;
        let mut g_prime_mean = vec![0.0; k];
        for r in 0..k {
            let mut acc = 0.0;
            for s in 0..n {
                let t = g[(r, s)].tanh();
                g[(r, s)] = t;
                acc += 1.0 - t * t;
            }
            g_prime_mean[r] = acc * inv_n;
        }
        let mut w_new = &g * z.transpose() * inv_n;
        for r in 0..k {
            for col in 0..k {
                w_new[(r, col)] -= g_prime_mean[r] * w[(r, col)];
            }
        }
        let w_new = symmetric_decorrelation(&w_new);
        let lim = (&w_new * w.transpose())
            .diagonal()
            .iter()
            .map(|d| (d.abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = w_new;
        if lim < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("FastICA did not converge in {} iterations", opts.max_iter);
    }

    let w_nd = to_nd(&w);
    let unmixing = w_nd.dot(&whitening);
    let mixing = dewhitening.dot(&w_nd.t());
    let sources = to_nd(&(&w * &z));
    let kurtosis = sources.rows().into_iter().map(excess_kurtosis).collect();
    Ok(IcaDecomposition {
        means,
        whitening,
        unmixing,
        mixing,
        sources,
        kurtosis,
        converged,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub recording: Recording,
    /// Indices of the zeroed components.
    pub removed: Vec<usize>,
    pub decomposition: IcaDecomposition,
}

/// Zeroes components whose |excess kurtosis| exceeds `threshold` and
/// rebuilds the channels from the rest.
pub fn ica_denoise(
    rec: &Recording,
    opts: FastIcaOptions,
    threshold: f64,
) -> Result<Denoised, CleaningError> {
    let ica = fastica(rec, opts)?;
    let removed: Vec<usize> = ica
        .kurtosis
        .iter()
        .enumerate()
        .filter(|(_, k)| k.abs() > threshold)
        .map(|(i, _)| i)
        .collect();
    let mut kept = ica.sources.clone();
    for &i in &removed {
        kept.row_mut(i).fill(0.0);
    }
    let data = ica.mixing.dot(&kept) + ica.means.view().insert_axis(Axis(1));
    Ok(Denoised {
        recording: rec.with_data(data)?,
        removed,
        decomposition: ica,
    })
}
