#![allow(dead_code)]

use std::collections::BTreeMap;

use eegunify::{Completeness, Event, FormatKind, LocatorRow, LocatorTable, Recording, Unit};
use ndarray::Array2;
use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn kind() -> impl Strategy<Value = FormatKind> {
    prop_oneof![
        Just(FormatKind::Edf),
        Just(FormatKind::Bdf),
        Just(FormatKind::Csv),
        Just(FormatKind::Txt),
        Just(FormatKind::Mat),
        Just(FormatKind::RawSidecar),
        Just(FormatKind::Unknown),
    ]
}

pub fn unit() -> impl Strategy<Value = Unit> {
    prop_oneof![
        Just(Unit::Volt),
        Just(Unit::Millivolt),
        Just(Unit::Microvolt),
        Just(Unit::Unknown),
    ]
}

/// Any finite double, including extremes and negative zero.
pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -1e6..1e6f64,
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

pub fn event() -> impl Strategy<Value = Event> {
    (0.0..1e5f64, 0.0..100.0f64, "\\PC{0,12}").prop_map(|(o, d, l)| Event::new(o, d, l))
}

/// A well-formed row: everything a saved locator can carry.
pub fn row() -> impl Strategy<Value = LocatorRow> {
    (
        "/data/[a-z0-9 ,\"']{1,10}/[a-z]{1,6}\\.(edf|csv|mat|raw)",
        "[a-z_]{1,6}",
        kind(),
        vec("[A-Za-z][A-Za-z0-9-]{0,4}", 0..6),
        prop::option::of(1e-3..1e5f64),
        prop::option::of(0.0..1e6f64),
        prop_oneof![
            Just(Completeness::Completed),
            Just(Completeness::Acceptable),
            Just(Completeness::Unavailable)
        ],
        prop::option::of(0.0..=100.0f64),
        any::<(bool, bool, bool)>(),
        prop::option::of(vec(event(), 0..4)),
    )
        .prop_flat_map(
            |(path, tag, kind, names, sr, dur, comp, q, (has_mean, has_std, has_units), events)| {
                let n = names.len();
                (
                    Just((path, tag, kind, names, sr, dur, comp, q, events)),
                    vec(finite(), n),
                    vec(0.0..1e3f64, n),
                    vec(unit(), n),
                    Just((has_mean && n > 0, has_std && n > 0, has_units && n > 0)),
                )
            },
        )
        .prop_map(
            |((path, tag, kind, names, sr, dur, comp, q, events), mean, std, units, (m, s, u))| {
                let mut events = events;
                if let Some(e) = events.as_mut() {
                    eegunify::recording::sort_events(e);
                }
                LocatorRow {
                    file_path: path,
                    domain_tag: tag,
                    file_type: kind,
                    channel_names: names,
                    sampling_rate: sr,
                    duration: dur,
                    completeness: if sr.is_some() {
                        comp
                    } else {
                        Completeness::Unavailable
                    },
                    quality_score: q,
                    norm_mean: m.then_some(mean),
                    norm_std: s.then_some(std),
                    units: u.then_some(units),
                    events,
                    extra: BTreeMap::new(),
                }
            },
        )
}

/// Rows with unique keys, sharing a set of extra columns.
pub fn table() -> impl Strategy<Value = LocatorTable> {
    (vec(row(), 0..12), vec("[A-Z][a-z]{1,6}", 0..3)).prop_flat_map(|(rows, extras)| {
        let n = rows.len();
        (
            Just(rows),
            Just(extras.clone()),
            vec(vec(prop::option::of("[a-z0-9 ;,]{1,8}"), extras.len()), n),
        )
            .prop_map(|(mut rows, extras, values)| {
                let mut seen = std::collections::HashSet::new();
                rows.retain(|r| seen.insert((r.domain_tag.clone(), r.file_path.clone())));
                for (row, vals) in rows.iter_mut().zip(values) {
                    for (k, v) in extras.iter().zip(vals) {
                        // Standard header names cannot be extra columns.
                        if let Some(v) = v.filter(|v| !v.trim().is_empty()) {
                            row.extra.insert(format!("X{k}"), v);
                        }
                    }
                }
                LocatorTable::new(rows).unwrap()
            })
    })
}

/// Gaussian noise recording with the given channel names and rate.
pub fn noise(seed: u64, names: &[&str], fs: f64, n: usize, sigma: f64) -> Recording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, sigma).unwrap();
    let data = Array2::from_shape_fn((names.len(), n), |_| d.sample(&mut rng));
    Recording::new(
        data,
        fs,
        names.iter().map(|s| s.to_string()).collect(),
        vec![Unit::Microvolt; names.len()],
        Vec::new(),
        "",
    )
    .unwrap()
}

pub fn sine(freq: f64, fs: f64, n: usize, amp: f64, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / fs + phase).sin())
        .collect()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
