mod common;

use std::f64::consts::PI;

use common::{pearson, rms, sine};
use eegunify::cleaning::{bandpass_filter, fastica, quality_score, FastIcaOptions, FilterKind};
use eegunify::unification::{align_channels, convert_units, infer_units, resample};
use eegunify::{Montage, Recording, Unit};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FS: f64 = 256.0;

fn single(x: Vec<f64>, fs: f64) -> Recording {
    let n = x.len();
    Recording::from_data(Array2::from_shape_vec((1, n), x).unwrap(), fs).unwrap()
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn bandpass(x: Vec<f64>) -> Vec<f64> {
    bandpass_filter(
        &single(x, FS),
        FilterKind::Bandpass,
        Some(1.0),
        Some(49.0),
        4,
    )
    .unwrap()
    .data()
    .row(0)
    .to_vec()
}

/// RMS over the middle of the signal, clear of edge transients.
fn mid_rms(x: &[f64]) -> f64 {
    let trim = x.len() / 5;
    rms(&x[trim..x.len() - trim])
}

#[test]
fn bandpass_stops_mains_and_passes_alpha() {
    let n = 20 * FS as usize;
    let sixty = sine(60.0, FS, n, 1.0, 0.3);
    let gain_60 = mid_rms(&bandpass(sixty.clone())) / mid_rms(&sixty);
    let db_60 = 20.0 * gain_60.log10();
    assert!(db_60 <= -20.0, "60 Hz at {db_60:.2} dB");

    let ten = sine(10.0, FS, n, 1.0, 0.3);
    let db_10 = 20.0 * (mid_rms(&bandpass(ten.clone())) / mid_rms(&ten)).log10();
    assert!(db_10.abs() <= 1.0, "10 Hz at {db_10:.3} dB");
}

#[test]
fn bandpass_has_zero_lag() {
    // Broadband in-band signal: several tones with random phases.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20 * FS as usize;
    let mut x = vec![0.0; n];
    for f in [3.0, 7.5, 11.0, 17.0, 23.5, 31.0, 40.0] {
        let tone = sine(
            f,
            FS,
            n,
            rng.random_range(0.5..2.0),
            rng.random_range(0.0..2.0 * PI),
        );
        x.iter_mut().zip(tone).for_each(|(a, b)| *a += b);
    }
    let y = bandpass(x.clone());
    let trim = 512;
    let best = (-40isize..=40)
        .max_by(|&a, &b| {
            let xc = |lag: isize| -> f64 {
                (trim..n - trim)
                    .map(|i| x[i] * y[(i as isize + lag) as usize])
                    .sum()
            };
            xc(a).total_cmp(&xc(b))
        })
        .unwrap();
    assert!(best.abs() <= 1, "peak at lag {best}");
}

#[test]
fn resample_halving_matches_analytic_sine() {
    let n = 10 * FS as usize;
    let rec = single(sine(10.0, FS, n, 1.0, 0.0), FS);
    let out = resample(&rec, 128.0).unwrap();
    assert_eq!(out.sampling_rate(), 128.0);
    assert_eq!(out.n_samples(), n / 2);
    let oracle = sine(10.0, 128.0, n / 2, 1.0, 0.0);
    let err: Vec<f64> = out
        .data()
        .row(0)
        .iter()
        .zip(&oracle)
        .map(|(a, b)| a - b)
        .collect();
    let trimmed = &err[50..err.len() - 50];
    assert!(rms(trimmed) < 1e-3, "rms error {}", rms(trimmed));
}

#[test]
fn downsampling_below_twice_the_tone_removes_it() {
    let n = 10 * FS as usize;
    let tone = sine(60.0, FS, n, 1.0, 0.0);
    let input = rms(&tone);
    // Each target puts 60 Hz above the new Nyquist frequency.
    for target in [100.0, 110.0, 64.0] {
        let out = resample(&single(tone.clone(), FS), target).unwrap();
        let y = out.data().row(0).to_vec();
        let ratio = mid_rms(&y) / input;
        assert!(ratio < 0.05, "{target} Hz: {ratio}");
    }
}

/// Three non-Gaussian sources: a sine, a square wave and Laplacian noise.
fn sources(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let f1 = rng.random_range(3.0..9.0);
    let f2 = rng.random_range(0.5..2.5);
    let phase = rng.random_range(0.0..2.0 * PI);
    let exp = rand_distr::Exp::new(1.0).unwrap();
    Array2::from_shape_fn((3, n), |(s, i)| {
        let t = i as f64 / FS;
        match s {
            0 => (2.0 * PI * f1 * t + phase).sin(),
            1 => (2.0 * PI * f2 * t).sin().signum(),
            _ => {
                let v: f64 = exp.sample(rng);
                if rng.random_bool(0.5) {
                    v
                } else {
                    -v
                }
            }
        }
    })
}

fn mixture(seed: u64, channels: usize, n: usize) -> (Array2<f64>, Recording) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = sources(&mut rng, n);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let a = Array2::from_shape_fn((channels, 3), |_| gauss.sample(&mut rng));
    let x = a.dot(&s) + 0.5;
    (s, Recording::from_data(x, FS).unwrap())
}

#[test]
fn fastica_recovers_seeded_mixtures() {
    let n = 5000;
    let mut per_source = [0.0; 3];
    for seed in 0..20 {
        let (s, rec) = mixture(seed, 3, n);
        let ica = fastica(
            &rec,
            FastIcaOptions {
                seed,
                ..FastIcaOptions::default()
            },
        )
        .unwrap();
        assert_eq!(ica.n_components(), 3);
        for (k, truth) in s.rows().into_iter().enumerate() {
            let t = truth.to_vec();
            let best = ica
                .sources
                .rows()
                .into_iter()
                .map(|c| pearson(&t, &c.to_vec()).abs())
                .fold(0.0, f64::max);
            per_source[k] += best / 20.0;
        }

        // Whitened data has identity covariance.
        let centered = rec.data() - &ica.means.view().insert_axis(ndarray::Axis(1));
        let z = ica.whitening.dot(&centered);
        let cov = z.dot(&z.t()) / n as f64;
        for ((i, j), v) in cov.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-6, "seed {seed} cov[{i},{j}] = {v}");
        }
    }
    for (k, mean) in per_source.iter().enumerate() {
        assert!(*mean > 0.95, "source {k}: mean |r| {mean}");
    }
}

#[test]
fn fastica_keeps_only_the_data_rank() {
    let (_, rec) = mixture(77, 8, 4000);
    let ica = fastica(
        &rec,
        FastIcaOptions {
            max_components: 20,
            ..FastIcaOptions::default()
        },
    )
    .unwrap();
    assert_eq!(ica.n_components(), 3);
    assert_eq!(ica.mixing.dim(), (8, 3));
    // The retained components rebuild the data.
    let rebuilt = ica.mixing.dot(&ica.sources) + ica.means.view().insert_axis(ndarray::Axis(1));
    let worst = (&rebuilt - rec.data())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-8, "{worst}");
}

fn field_recording(labels: &[&str], f: impl Fn([f64; 3], usize) -> f64, n: usize) -> Recording {
    let m = Montage::standard_1010();
    let data = Array2::from_shape_fn((labels.len(), n), |(c, i)| {
        f(m.position(labels[c]).unwrap(), i)
    });
    Recording::new(
        data,
        FS,
        names(labels),
        vec![Unit::Microvolt; labels.len()],
        vec![],
        "",
    )
    .unwrap()
}

/// Every distinct 10-10 site except C3.
fn donors_without_c3() -> Vec<&'static str> {
    Montage::standard_1010()
        .labels()
        .iter()
        .map(String::as_str)
        .filter(|l| !matches!(*l, "C3" | "T3" | "T4" | "T5" | "T6"))
        .collect()
}

#[test]
fn align_reorder_is_bit_exact() {
    let rec = common::noise(3, &["Pz", "C4", "Fz", "C3", "Cz"], FS, 700, 25.0);
    let out = align_channels(&rec, &names(&["Cz", "C3", "C4"]), Montage::standard_1010()).unwrap();
    assert_eq!(out.channel_names(), names(&["Cz", "C3", "C4"]));
    for (dst, src) in [(0, 4), (1, 3), (2, 1)] {
        for (a, b) in out.data().row(dst).iter().zip(rec.data().row(src)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn align_interpolates_linear_and_constant_fields() {
    let order = names(&["Cz", "C3", "C4"]);
    let m = Montage::standard_1010();
    let c3 = m.position("C3").unwrap();

    let linear =
        |p: [f64; 3], i: usize| (1.0 + 0.1 * (i % 7) as f64) * (2.0 * p[0] + p[1] + 3.0 * p[2]);
    let donors = donors_without_c3();
    let rec = field_recording(&donors, linear, 64);
    let out = align_channels(&rec, &order, m).unwrap();
    for i in 0..64 {
        let truth = linear(c3, i);
        let rel = (out.data()[[1, i]] - truth).abs() / truth.abs();
        assert!(rel < 0.10, "sample {i}: relative error {rel}");
    }

    let rec = field_recording(&donors, |_, _| -37.25, 64);
    let out = align_channels(&rec, &order, m).unwrap();
    for v in out.data().row(1) {
        assert!((v + 37.25).abs() <= 1e-12, "{v}");
    }
}

#[test]
fn volts_and_scaled_microvolts_agree_after_conversion() {
    let base = common::noise(11, &["Fz", "Cz", "Pz"], FS, 2000, 20e-6);
    let volts = base.clone().with_units(vec![Unit::Volt; 3]).unwrap();
    let micro = base
        .with_data(base.data() * 1e6)
        .unwrap()
        .with_units(vec![Unit::Microvolt; 3])
        .unwrap();

    let settle = |r: &Recording| {
        let inferred = infer_units(r);
        convert_units(&r.clone().with_units(inferred).unwrap(), Unit::Microvolt).unwrap()
    };
    let (a, b) = (settle(&volts), settle(&micro));
    assert_eq!(infer_units(&volts), vec![Unit::Volt; 3]);
    assert_eq!(infer_units(&micro), vec![Unit::Microvolt; 3]);
    assert!(a.units().iter().all(|u| *u == Unit::Microvolt));
    let worst = (a.data() - b.data())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn quality_separates_flatline_and_mains_from_eeg() {
    let n = 10 * FS as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = Normal::new(0.0, 4.0).unwrap();
    let good: Vec<f64> = sine(10.0, FS, n, 20.0, 0.0)
        .into_iter()
        .map(|v| v + noise.sample(&mut rng))
        .collect();
    let mains: Vec<f64> = sine(50.0, FS, n, 200.0, 0.0)
        .iter()
        .zip(&good)
        .map(|(a, b)| a + b)
        .collect();
    let flat = vec![0.0; n];

    let score = |x: Vec<f64>| quality_score(&single(x, FS)).unwrap().score;
    assert!(score(good) > 80.0);
    assert!(score(mains) <= 80.0);
    assert!(score(flat) <= 80.0);
}
